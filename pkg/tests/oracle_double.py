"""Scriptable wire-protocol peer for exercising the external-oracle client.

Usage: python oracle_double.py MODE [k] [K]

Modes:
  echo          valid peer; every confidence is the uniform vector
  bad-greeting  first line is not JSON
  wrong-k       announces k+1 in the greeting
  malformed     valid greeting, then a non-JSON response line
  id-mismatch   responds with id+1
  sneaky-feature  attaches a feature despite announcing d=0
"""

import json
import sys


def main():
    mode = sys.argv[1]
    k = int(sys.argv[2]) if len(sys.argv) > 2 else 4
    num_classes = int(sys.argv[3]) if len(sys.argv) > 3 else 3

    if mode == "bad-greeting":
        print("definitely not json {", flush=True)
        sys.stdin.readline()
        return 0
    announced_k = k + 1 if mode == "wrong-k" else k
    print(
        json.dumps({"proto": 1, "k": announced_k, "K": num_classes, "d": 0}),
        flush=True,
    )
    uniform = [1.0 / num_classes] * num_classes
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        req = json.loads(line)
        if req["id"] == -1:
            return 0
        if mode == "malformed":
            print("}} broken {{", flush=True)
            continue
        rid = req["id"] + 1 if mode == "id-mismatch" else req["id"]
        resp = {"id": rid, "confidence": uniform}
        if mode == "sneaky-feature":
            resp["feature"] = [0.0] * 5
        print(json.dumps(resp), flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
