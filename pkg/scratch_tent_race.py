import time
import numpy as np
import fqeval as fq
from scratch_drift import project_to_spline

def make_tent(top, softw, asym, ripple_amp, ripple_period=0.06,
              flip_pos=-1.93, flip_width=0.04):
    def shape(s):
        s = np.asarray(s, dtype=float)
        mag = top - np.sqrt(s * s + softw * softw)
        sgn = np.tanh((s - flip_pos) / flip_width)
        f = mag * sgn + asym * np.tanh(s / 0.5) \
            + ripple_amp * np.cos(2 * np.pi * s / ripple_period + 0.3)
        return np.clip(f, -1.96, 1.96)
    return shape

def mae(coeffs, n, T, reps, seed0):
    errs = []
    env = fq.make_spline_env(coeffs, horizon=T)
    beh = fq.target_policy('behavior', env)
    tgt = fq.target_policy('a', env)
    for r in range(reps):
        seed = fq.derive_seed(seed0, 'replicate', 'a', n, T, r)
        b = fq.simulate(env, beh, n, seed)
        m = fq.FittedQEvaluation(policy=tgt, k_rule=fq.LoocvK()).fit(b, env)
        errs.append(abs(m.estimate_value()))
    return float(np.mean(errs))

CANDS = {
    'tent11': dict(top=2.00, softw=0.25, asym=0.04, ripple_amp=0.16),
    'tent12': dict(top=1.98, softw=0.20, asym=0.04, ripple_amp=0.14),
}
t0 = time.perf_counter()
for name, kw in CANDS.items():
    coeffs = project_to_spline(make_tent(**kw), 200)
    grid = np.linspace(-2, 2, 10001)
    sup = float(np.abs(fq.make_spline_env(coeffs, horizon=2).drift(grid)).max())
    for seed0 in (20260810, 1):
        Ts = [20, 40, 60, 80, 100]
        et = [mae(coeffs, 2000, T, 50, seed0) for T in Ts]
        st = np.polyfit(np.log(Ts), np.log(et), 1)[0]
        print(f'{name} sup={sup:.3f} seed {seed0}: slope_T={st:+.3f} '
              f'({time.perf_counter()-t0:.0f}s)', flush=True)
        print('   T errs:', ' '.join(f'{e:.4f}' for e in et), flush=True)
