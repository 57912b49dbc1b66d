"""Stand-in scoring child: answers the JSON-lines protocol, deliberately out of order.

score = 10 * (number of tokens shared by src and tgt) + len(tgt tokens).
Every request id is appended to the log file given as argv[1].
Modes (argv[2]): ok, nan, crash, silent.
"""

import json
import os
import select
import sys

log_path = sys.argv[1]
mode = sys.argv[2] if len(sys.argv) > 2 else "ok"


def reply(req):
    with open(log_path, "a", encoding="utf-8") as log:
        log.write(req["id"] + "\n")
    src, tgt = req["src"].split(), req["tgt"].split()
    score = 10 * len(set(src) & set(tgt)) + len(tgt)
    if mode == "nan":
        score = float("nan")
    sys.stdout.write(json.dumps({"id": req["id"], "score": score}) + "\n")


buf = b""
held = []
while True:
    ready, _, _ = select.select([0], [], [], 0.05)
    if not ready:
        # idle: answer whatever is pending, newest first
        for req in reversed(held):
            reply(req)
        held.clear()
        sys.stdout.flush()
        continue
    chunk = os.read(0, 65536)
    if not chunk:
        break
    buf += chunk
    *lines, buf = buf.split(b"\n")
    for line in lines:
        if not line.strip():
            continue
        if mode == "crash":
            sys.exit(3)
        if mode == "silent":
            continue
        held.append(json.loads(line))
for req in reversed(held):
    reply(req)
sys.stdout.flush()
