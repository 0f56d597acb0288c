#!/usr/bin/env node
/**
 * Bridge CLI: serve one environment over the line protocol.
 *
 *   spikewire-bridge --env NAME            # stdio transport (default)
 *   spikewire-bridge --env NAME --port P   # TCP, serves a single session
 *
 * One environment and one session per process; the evolution framework
 * spawns one bridge per worker.
 */

import * as net from "node:net";
import * as readline from "node:readline";
import { knownEnvironments, resolveEnvironment } from "./environments.js";
import { BridgeSession } from "./session.js";

interface CliArgs {
  env: string;
  port: number | null;
}

function parseArgs(argv: string[]): CliArgs {
  let env: string | null = null;
  let port: number | null = null;
  for (let i = 0; i < argv.length; i++) {
    switch (argv[i]) {
      case "--env":
        env = argv[++i];
        break;
      case "--port":
        port = Number(argv[++i]);
        if (!Number.isInteger(port) || port < 0) {
          throw new Error(`invalid --port value: ${argv[i]}`);
        }
        break;
      case "--list":
        process.stdout.write(knownEnvironments().join("\n") + "\n");
        process.exit(0);
        break;
      case "--help":
        process.stdout.write(
          "usage: spikewire-bridge --env NAME [--port P]\n" +
            "       spikewire-bridge --list\n",
        );
        process.exit(0);
        break;
      default:
        throw new Error(`unknown argument: ${argv[i]}`);
    }
  }
  if (env === null) {
    throw new Error("--env is required (see --list)");
  }
  return { env, port };
}

function serveStream(
  session: BridgeSession,
  input: NodeJS.ReadableStream,
  output: NodeJS.WritableStream,
  onEnd: (code: number) => void,
): void {
  const rl = readline.createInterface({ input, crlfDelay: Infinity });
  let endedByRequest = false;
  rl.on("line", (line) => {
    const result = session.handleLine(line);
    if (result.ended) {
      endedByRequest = true;
      rl.close();
      // exit only once the reply line has flushed
      output.write(result.line, () => onEnd(result.exitCode));
    } else {
      output.write(result.line);
    }
  });
  rl.on("close", () => {
    if (!endedByRequest) onEnd(0);
  });
}

export function main(argv: string[]): void {
  let args: CliArgs;
  try {
    args = parseArgs(argv);
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`);
    process.exit(2);
  }

  let session: BridgeSession;
  try {
    session = new BridgeSession(resolveEnvironment(args.env));
  } catch (err) {
    // structured error on stdout so protocol clients see it, then exit
    process.stdout.write(JSON.stringify({ error: (err as Error).message }) + "\n");
    process.stderr.write(`error: ${(err as Error).message}\n`);
    process.exit(1);
  }

  if (args.port === null) {
    serveStream(session, process.stdin, process.stdout, (code) => process.exit(code));
  } else {
    const server = net.createServer((socket) => {
      // single session per process: stop accepting once connected
      server.close();
      serveStream(session, socket, socket, (code) => {
        socket.end(() => process.exit(code));
      });
    });
    server.listen(args.port, () => {
      const address = server.address() as net.AddressInfo;
      process.stderr.write(`listening on port ${address.port}\n`);
    });
  }
}

main(process.argv.slice(2));
