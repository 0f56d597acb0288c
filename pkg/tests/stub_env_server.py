#!/usr/bin/env python3
"""Line-protocol stub environment for exercising the remote client.

Deterministic toy dynamics: the first observation component echoes the
last applied action component, reward is +1 per step, episodes end after
--max-steps.  Misbehaviour flags let tests trigger protocol violations.
"""

from __future__ import annotations

import argparse
import json
import sys


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--obs-dim", type=int, default=3)
    parser.add_argument("--act-dim", type=int, default=2)
    parser.add_argument("--kind", choices=("discrete", "continuous"), default="continuous")
    parser.add_argument("--max-steps", type=int, default=5)
    parser.add_argument("--name", default="stub")
    parser.add_argument("--wrong-obs-dim", action="store_true",
                        help="send one obs entry too many on reset")
    parser.add_argument("--garbage-step", action="store_true",
                        help="reply to the first step with a non-JSON line")
    parser.add_argument("--fail-after-steps", type=int, default=0,
                        help="emit a malformed reply once this many steps served")
    parser.add_argument("--nan-obs", action="store_true",
                        help="send a NaN observation entry on reset")
    args = parser.parse_args()

    def send(obj):
        sys.stdout.write(json.dumps(obj) + "\n")
        sys.stdout.flush()

    t = 0
    seed = 0
    done = True
    steps_served = 0
    for line in sys.stdin:
        try:
            msg = json.loads(line)
        except json.JSONDecodeError:
            send({"error": "malformed request"})
            return 1
        cmd = msg.get("cmd")
        if cmd == "spec":
            send({
                "obs_dim": args.obs_dim,
                "action": args.kind,
                "act_dim": args.act_dim,
                "low": [-1.0] * args.act_dim,
                "high": [1.0] * args.act_dim,
                "max_steps": args.max_steps,
                "name": args.name,
            })
        elif cmd == "reset":
            seed = int(msg.get("seed", 0))
            t = 0
            done = False
            dim = args.obs_dim + 1 if args.wrong_obs_dim else args.obs_dim
            first = float("nan") if args.nan_obs else 0.0
            send({"obs": [first] + [float(seed)] * (dim - 1)})
        elif cmd == "step":
            if done:
                send({"error": "step after done"})
                return 1
            if args.garbage_step:
                sys.stdout.write("this is not json\n")
                sys.stdout.flush()
                continue
            steps_served += 1
            if args.fail_after_steps and steps_served > args.fail_after_steps:
                sys.stdout.write("simulated backend crash\n")
                sys.stdout.flush()
                return 1
            action = msg["action"]
            first = float(action[0]) if isinstance(action, list) else float(action)
            t += 1
            done = t >= args.max_steps
            send({
                "obs": [first] + [float(seed)] * (args.obs_dim - 1),
                "reward": 1.0,
                "done": done,
            })
        elif cmd == "close":
            send({"ok": True})
            return 0
        else:
            send({"error": f"unknown command {cmd!r}"})
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
