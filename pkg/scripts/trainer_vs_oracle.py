"""Compare trained programming plans against the exhaustive binary-plan optimum on small lattices."""

import argparse
import time
import warnings

from cmor.bank import DeviceParams
from cmor.eca import decode_rule
from cmor.experiments import random_separable_dataset
from cmor.train import SeparabilityWarning, exhaustive_oracle, train_plan


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--rule", type=int, default=60)
    parser.add_argument("-n", type=int, default=4)
    parser.add_argument("-m", type=int, default=3)
    args = parser.parse_args()

    rule = decode_rule(args.rule)
    params = DeviceParams().ideal()
    equal = 0
    start = time.perf_counter()
    print("seed,trained,oracle,trained_writes,oracle_writes")
    for seed in range(args.seeds):
        dataset, _ = random_separable_dataset(seed, rule, args.n, args.m, params)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SeparabilityWarning)
            plan, _ = train_plan(dataset, rule, args.m, params)
        best = exhaustive_oracle(dataset, rule, args.n, args.m, params)
        equal += plan.achieved_accuracy == best.achieved_accuracy
        print(f"{seed},{plan.achieved_accuracy},{best.achieved_accuracy},{len(plan.writes)},{len(best.writes)}")
    print(f"matched {equal}/{args.seeds} in {time.perf_counter() - start:.1f} s")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
