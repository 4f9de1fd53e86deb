"""
Stage 1: estimating the relay-to-source channel
===============================================

The relay broadcasts one pilot row; each source sees ``h_ir p_R + noise``
and forms an LMMSE estimate. The error covariance is a scaled identity that
depends on the pilot only through its energy, so the best pilot spends the
full relay budget. This script checks that claim by simulation.
"""

import numpy as np

from twrelay import SystemConfig
from twrelay.backward import error_covariance, lmmse_backward, nonoptimal_stage1_training, optimal_stage1_training
from twrelay.channel import complex_gaussian, stage1_receive

cfg = SystemConfig()
rng = np.random.default_rng(1)
Pr = 100.0  # 20 dB

# %% Closed-form error variance per antenna, full vs 80% relay power
for label, train in (("full power", optimal_stage1_training(Pr, cfg.Lr)),
                     ("80% power ", nonoptimal_stage1_training(Pr, cfg.Lr))):
    var = error_covariance(train.p_R, 1.0, 1.0, cfg.N1)[0, 0].real
    print(f"{label}: predicted error variance {var:.5f}")

# %% Monte Carlo over 5000 channel draws
p_R = optimal_stage1_training(Pr, cfg.Lr).p_R
err = []
for _ in range(5000):
    h = complex_gaussian(rng, (cfg.N1, 1))
    Ytilde, _ = stage1_receive(h, p_R, 1.0, rng)
    est = lmmse_backward(Ytilde, p_R, 1.0, 1.0)
    err.append(np.sum(np.abs(est.h_hat - h) ** 2) / cfg.N1)
err = np.array(err)
print(f"simulated: {err.mean():.5f} +/- {err.std(ddof=1) / np.sqrt(err.size):.5f} (expected {1 / 101:.5f})")
