"""Three ways to calibrate the KSD U-statistic under the null.

On one sample from N(0, 1) the bootstrap and spectral thresholds should be
close, and the bootstrap p-values over many null samples should be roughly
uniform.
"""

import numpy as np
from scipy import stats

from ksdgof import build_gram, ksd_bootstrap_test, ksd_spectral_test, standard_normal_model

model = standard_normal_model(1)
rng = np.random.default_rng(0)
x = rng.standard_normal((200, 1))
g = build_gram(model, None, x)

boot = ksd_bootstrap_test(model, None, x, m=5000, seed=1, gram=g)
spec = ksd_spectral_test(model, None, x, draws=50_000, seed=1, gram=g)
print(f"U statistic          {boot.statistic:.5f}")
print(f"bootstrap threshold  {boot.threshold:.5f}")
print(f"spectral threshold   {spec.threshold:.5f}")

p = np.array([ksd_bootstrap_test(model, None, rng.standard_normal((100, 1)), seed=t).p_value for t in range(300)])
print(f"null rejection rate  {np.mean(p < 0.05):.3f}")
print(f"KS distance to U(0,1) {stats.kstest(p, 'uniform').statistic:.3f}")
