"""Scratch: design the default drift coefficients by projecting a target
shape onto a clamped cubic B-spline and measuring the error-scaling slopes."""
import itertools
import sys
import time

import numpy as np
from scipy.interpolate import BSpline

import fqeval as fq


def smoothstep(z):
    z = np.clip(z, 0.0, 1.0)
    return z * z * (3.0 - 2.0 * z)


def make_shape(delta_frac, ramp_frac, ripple_amp, ripple_period,
               band=(0.25, 1.75), flips=((-1.1, 0.35), (0.55, 0.35))):
    lo, hi = band
    L = hi - lo

    def magnitude(x):
        u = np.clip((np.abs(x) - lo) / L, 0.0, 1.0)
        u2 = u + delta_frac - smoothstep((u - (1.0 - ramp_frac)) / ramp_frac)
        u2 = np.mod(u2, 1.0)
        return lo + L * u2

    def sign_wave(s):
        out = np.ones_like(s)
        for fpos, fwidth in flips:
            out = out * np.tanh((s - fpos) / fwidth)
        return out

    def shape(s):
        s = np.asarray(s, dtype=float)
        f = magnitude(s) * sign_wave(s) + ripple_amp * np.cos(2 * np.pi * s / ripple_period)
        return np.clip(f, -1.97, 1.97)

    return shape


def project_to_spline(fn, n_coef, domain=(-2.0, 2.0), degree=3):
    lo, hi = domain
    interior = np.linspace(lo, hi, n_coef - degree + 1)[1:-1]
    knots = np.concatenate([[lo] * (degree + 1), interior, [hi] * (degree + 1)])
    grid = np.linspace(lo, hi, 8001)
    design = BSpline.design_matrix(grid, knots, degree).toarray()
    coef, *_ = np.linalg.lstsq(design, fn(grid), rcond=None)
    return tuple(round(float(c), 6) for c in coef)


def probe(coeffs, label, reps=10, seed0=99):
    def mae(n, T):
        errs, ks = [], []
        env = fq.make_spline_env(coeffs, horizon=T)
        beh = fq.target_policy('behavior', env)
        tgt = fq.target_policy('a', env)
        for r in range(reps):
            seed = fq.derive_seed(seed0, 'replicate', 'a', n, T, r)
            b = fq.simulate(env, beh, n, seed)
            m = fq.FittedQEvaluation(policy=tgt, k_rule=fq.LoocvK()).fit(b, env)
            errs.append(abs(m.estimate_value()))
            ks.append(np.mean(m.k_per_step_))
        return float(np.mean(errs)), float(np.mean(ks))

    ns = [200, 400, 800, 1600]
    en = [mae(n, 20) for n in ns]
    slope_n = np.polyfit(np.log(ns), np.log([e for e, _ in en]), 1)[0]
    Ts = [20, 40, 60, 80, 100]
    et = [mae(2000, T) for T in Ts]
    slope_t = np.polyfit(np.log(Ts), np.log([e for e, _ in et]), 1)[0]
    print(f'{label}: slope_n={slope_n:+.3f} slope_T={slope_t:+.3f}')
    print('   n errors:', ' '.join(f'{e:.3g}(K{k:.0f})' for e, k in en))
    print('   T errors:', ' '.join(f'{e:.3g}(K{k:.0f})' for e, k in et))
    return slope_n, slope_t


CONFIGS = {
    "r1": dict(delta_frac=0.0618, ramp_frac=0.37, ripple_amp=0.2, ripple_period=0.07),
    "r2": dict(delta_frac=0.0618, ramp_frac=0.50, ripple_amp=0.2, ripple_period=0.07),
    "r3": dict(delta_frac=0.10, ramp_frac=0.37, ripple_amp=0.25, ripple_period=0.07),
    "r4": dict(delta_frac=0.0382, ramp_frac=0.42, ripple_amp=0.2, ripple_period=0.07),
    "r5": dict(delta_frac=0.0618, ramp_frac=0.37, ripple_amp=0.3, ripple_period=0.07),
}

if __name__ == "__main__":
    names = sys.argv[1:] or list(CONFIGS)
    for name in names:
        t0 = time.perf_counter()
        shape = make_shape(**CONFIGS[name])
        coeffs = project_to_spline(shape, 140)
        env = fq.make_spline_env(coeffs, horizon=2)
        grid = np.linspace(-2, 2, 10001)
        sup = np.abs(env.drift(grid)).max()
        probe(coeffs, f'{name} sup={sup:.3f}')
        print(f'   ({time.perf_counter() - t0:.0f}s)')
