"""Scratch: error surface over (K, n) with fixed K, plus LOO score curves."""
import sys
import time

import numpy as np

import fqeval as fq
from scratch_drift import CONFIGS, make_shape, project_to_spline


def err_surface(coeffs, label, reps=10):
    print(f'== {label}: mean|nu_hat| for fixed K')
    ks = [6, 9, 12, 16, 20, 25, 30]
    for n in (200, 630, 2000):
        row = []
        env = fq.make_spline_env(coeffs, horizon=20)
        beh = fq.target_policy('behavior', env)
        tgt = fq.target_policy('a', env)
        for k in ks:
            errs = []
            for r in range(reps):
                seed = fq.derive_seed(7, 'x', n, k, r)
                b = fq.simulate(env, beh, n, seed)
                try:
                    m = fq.FittedQEvaluation(policy=tgt, k_rule=fq.FixedK(k)).fit(b, env)
                    errs.append(abs(m.estimate_value()))
                except Exception:
                    errs.append(np.nan)
            row.append(np.nanmean(errs))
        print(f'   n={n:5d}: ' + ' '.join(f'K{k}:{e:.4f}' for k, e in zip(ks, row)))


def t_surface(coeffs, label, reps=8):
    print(f'== {label}: mean|nu_hat| vs T for fixed K at n=2000')
    for k in (9, 14, 20):
        row = []
        for T in (20, 60, 100):
            env = fq.make_spline_env(coeffs, horizon=T)
            beh = fq.target_policy('behavior', env)
            tgt = fq.target_policy('a', env)
            errs = []
            for r in range(reps):
                seed = fq.derive_seed(7, 'y', T, k, r)
                b = fq.simulate(env, beh, 2000, seed)
                m = fq.FittedQEvaluation(policy=tgt, k_rule=fq.FixedK(k)).fit(b, env)
                errs.append(abs(m.estimate_value()))
            row.append(np.mean(errs))
        slope = np.polyfit(np.log([20, 60, 100]), np.log(row), 1)[0]
        print(f'   K={k:2d}: ' + ' '.join(f'T{t}:{e:.4f}' for t, e in zip((20, 60, 100), row))
              + f'  slope_T={slope:+.2f}')


if __name__ == "__main__":
    which = sys.argv[1] if len(sys.argv) > 1 else "H"
    if which == "H":
        def greville(m):
            kn = np.concatenate([[-2]*4, np.linspace(-2, 2, m+2)[1:-1], [2]*4])
            return np.array([kn[i+1:i+4].mean() for i in range(m+4)])
        xi = greville(100 - 4)
        c = 1.55*np.sin(1.2*np.pi*xi/2 + 0.4) + 0.4*np.where(np.arange(100) % 2 == 0, 1.0, -1.0)
        coeffs = tuple(np.clip(c, -1.95, 1.95))
        label = 'H'
    else:
        coeffs = project_to_spline(make_shape(**CONFIGS[which]), 140)
        label = which
    t0 = time.perf_counter()
    err_surface(coeffs, label)
    t_surface(coeffs, label)
    print(f'({time.perf_counter()-t0:.0f}s)')
