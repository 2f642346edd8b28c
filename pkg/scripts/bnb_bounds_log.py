"""Node logs of the sphere branch and bound: lower/upper bounds versus subregions."""

import argparse

from disjsos.bench import classic_form
from disjsos.bnb import algorithm2


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("forms", nargs="*", default=["Robinson-2", "PARTITION"])
    ap.add_argument("--node-cap", type=int, default=500)
    args = ap.parse_args()
    for name in args.forms:
        for init in ("orthants", "regular"):
            res = algorithm2(classic_form(name), 1e-4, init, node_cap=args.node_cap)
            path = f"nodelog_{name.lower()}_{init}.csv"
            with open(path, "w") as fh:
                fh.write(res.log_csv())
            print(f"{name} {init}: {res.subregion_count} subregions, L={res.L:+.4e}, "
                  f"U={res.U:+.4e} ({res.reason}) -> {path}")


if __name__ == "__main__":
    main()
