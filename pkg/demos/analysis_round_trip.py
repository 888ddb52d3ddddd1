"""
Fitting an M2 tide and predicting it forward
============================================

Two weeks of hourly synthetic sea level, fitted with ordinary least squares
and evaluated one day past the end of the record.
"""
import numpy as np

from tapmt import ConstituentSet, FitConfig, analyze, predict
from tapmt.signals import ConstituentSpec, SyntheticSpec, generate

###############################################################################
# A record with a known answer: 1.2 m of M2 at 40 degrees on a 0.3 m mean,
# plus a little noise.

spec = SyntheticSpec(
    constituents=(ConstituentSpec("M2", amplitude=1.2, phase=40.0),),
    a0=0.3,
    noise_std=0.02,
    count=336,
)
series = generate(spec, seed=7)
print(series)

###############################################################################
# Fit with and without the linear trend term.

m2 = ConstituentSet.from_names(["M2"])
for cfg in (FitConfig(include_trend=True), FitConfig(include_trend=False)):
    sol = analyze(series, m2, cfg)
    print(f"trend={cfg.include_trend!s:5}  a0={sol.a0:.4f}  a1={sol.a1:+.2e}  "
          f"A={sol.amplitude('M2'):.4f} m  phi={sol.phase('M2'):.2f} deg")

###############################################################################
# Predict the next 24 hours and compare with the noise-free truth.

future = series.times[-1] + 1 + np.arange(24.0)
pred = predict(sol, future)
truth = generate(SyntheticSpec(spec.constituents, a0=0.3, start=future[0], count=24), noise=False)
print("max prediction error over the next day:",
      f"{np.max(np.abs(pred.elevations - truth.elevations)):.4f} m")
