import sys
import time
import numpy as np
import fqeval as fq
from scratch_drift import project_to_spline

PARAMS = dict(top=2.02, softw=0.25, asym=0.04, ripple_amp=0.12, ripple_period=0.06,
              flip_pos=-1.93, flip_width=0.04)

def make_tent(top, softw, asym, ripple_amp, ripple_period, flip_pos, flip_width):
    def shape(s):
        s = np.asarray(s, dtype=float)
        mag = top - np.sqrt(s * s + softw * softw)
        sgn = np.tanh((s - flip_pos) / flip_width)
        f = mag * sgn + asym * np.tanh(s / 0.5) \
            + ripple_amp * np.cos(2 * np.pi * s / ripple_period + 0.3)
        return np.clip(f, -1.96, 1.96)
    return shape

coeffs = project_to_spline(make_tent(**PARAMS), 200)

def mae(n, T, reps, seed0):
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

mode = sys.argv[1] if len(sys.argv) > 1 else 'T'
seed0 = int(sys.argv[2]) if len(sys.argv) > 2 else 20260810
t0 = time.perf_counter()
if mode == 'T':
    Ts = [20, 40, 60, 80, 100]
    et = [mae(2000, T, 50, seed0) for T in Ts]
    st = np.polyfit(np.log(Ts), np.log(et), 1)[0]
    print(f'seed {seed0}: slope_T={st:+.3f} ({time.perf_counter()-t0:.0f}s)')
    print('  T errs:', ' '.join(f'{e:.4f}' for e in et))
else:
    ns = [200, 400, 800, 1600]
    en = [mae(n, 20, 50, seed0) for n in ns]
    sn = np.polyfit(np.log(ns), np.log(en), 1)[0]
    print(f'seed {seed0}: slope_n={sn:+.3f} ({time.perf_counter()-t0:.0f}s)')
    print('  n errs:', ' '.join(f'{e:.4f}' for e in en))
