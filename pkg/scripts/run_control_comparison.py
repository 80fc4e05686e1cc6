#!/usr/bin/env python3
"""Forward-backward sweep vs brute-force enumeration across horizons.

Prints the bang-bang schedule found by each method; for horizons past
eleven the optimum starts inserting rest steps that let the stock recover.
"""

import argparse

import numpy as np

from fishcoop import control, env


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seq", type=float, default=1.0)
    parser.add_argument("--growth-rate", type=float, default=1.0)
    parser.add_argument("--e-total", type=float, default=1.0)
    parser.add_argument("--max-horizon", type=int, default=16)
    args = parser.parse_args()

    params = env.EnvParams(
        n_agents=1, s_eq=args.seq, growth_rate=args.growth_rate, e_max=args.e_total
    )
    for horizon in range(1, args.max_horizon + 1):
        sweep = control.forward_backward_sweep(params, horizon)
        schedule, oracle = control.brute_force_optimal(params, horizon)
        rests = [int(k) for k in np.where(schedule == 0)[0]]
        status = "converged" if sweep.converged else "NOT converged"
        print(
            f"T={horizon:2d}: sweep {sweep.objective:.9f} ({status:13s}) "
            f"oracle {oracle:.9f} gap {oracle - sweep.objective:+.2e} "
            f"rest steps {rests}"
        )


if __name__ == "__main__":
    main()
