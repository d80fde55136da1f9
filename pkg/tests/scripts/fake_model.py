"""Misbehaving stdio model servers for adapter tests.

Usage: fake_model.py MODE [ARG]
    constant C     always answers y = C
    die N          exits after answering N predict requests
    garbage        answers predict with a non-JSON line
    hang           never answers predict
    protocol V     announces protocol version V
    short          returns one output too few
    error          returns an error object
"""

import json
import sys
import time

mode = sys.argv[1]
arg = sys.argv[2] if len(sys.argv) > 2 else None
served = 0


def send(obj):
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


for line in sys.stdin:
    req = json.loads(line)
    if req["op"] == "hello":
        send({"protocol": int(arg) if mode == "protocol" else 1, "input_dim": 2})
        continue
    n = len(req["x"])
    if mode == "die" and served >= int(arg):
        sys.exit(3)
    served += 1
    if mode == "garbage":
        sys.stdout.write("not json\n")
        sys.stdout.flush()
    elif mode == "hang":
        time.sleep(60)
    elif mode == "short":
        send({"y": [0.0] * (n - 1)})
    elif mode == "error":
        send({"error": "boom"})
    else:
        send({"y": [float(arg if arg is not None else 0.25)] * n})
