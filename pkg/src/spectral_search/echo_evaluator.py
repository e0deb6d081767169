"""Reference evaluator process: the loss is the number of +1 bits.

Run as ``python -m spectral_search.echo_evaluator --n 8``.  Extra flags make
it misbehave on purpose, which the protocol tests rely on.
"""

import argparse
import json
import sys


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, required=True)
    ap.add_argument("--batch", type=int, default=1,
                    help="collect this many requests, then answer them in reverse order")
    ap.add_argument("--nan", action="store_true", help="answer every request with NaN")
    ap.add_argument("--garbage", action="store_true", help="answer with a non-JSON line")
    ap.add_argument("--fail-on", type=int, default=None,
                    help="answer with an error when the point has this many +1 bits")
    args = ap.parse_args(argv)

    out = sys.stdout
    out.write(json.dumps({"proto": 1, "n": args.n}) + "\n")
    out.flush()
    held = []
    for line in sys.stdin:
        if not line.strip():
            continue
        req = json.loads(line)
        held.append(req)
        if len(held) < args.batch:
            continue
        for req in reversed(held):
            ones = sum(1 for v in req["point"] if v == 1)
            if args.garbage:
                out.write("this is not json\n")
            elif args.fail_on is not None and ones == args.fail_on:
                out.write(json.dumps({"id": req["id"], "error": "refused"}) + "\n")
            elif args.nan:
                out.write('{"id": %d, "loss": NaN}\n' % req["id"])
            else:
                out.write(json.dumps({"id": req["id"], "loss": ones}) + "\n")
        out.flush()
        held.clear()


if __name__ == "__main__":
    main()
