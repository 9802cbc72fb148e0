"""
SSDP kernels against pairwise STDP
==================================

Tabulate the exponential and Gaussian SSDP updates for a single co-firing
pair as the spike-time gap grows, next to classical STDP. Unlike STDP, both
SSDP kernels ignore the order of the two spikes.
"""
import numpy as np

from ssdp.checks import oracle_check
from ssdp.plasticity import FirstSpikeTimes, SsdpConfig, ssdp_exp, ssdp_gauss, stdp_baseline

exp_cfg = SsdpConfig("exp", a_plus=0.02, a_minus=0.01)
gauss_cfg = SsdpConfig("gauss", a_plus=0.015, a_minus=None, a_baseline=0.005, sigma=1.0)
one = np.ones((1, 1))

print(" dt   exp-SSDP  gauss-SSDP      STDP")
for dt in range(-6, 7, 2):
    e = ssdp_exp(one, one, np.full((1, 1, 1), abs(dt)), exp_cfg)[0, 0]
    g = ssdp_gauss(one, one, np.full((1, 1, 1), dt), gauss_cfg)[0, 0]
    pre = FirstSpikeTimes(np.array([[10]]), 30)
    post = FirstSpikeTimes(np.array([[10 + dt]]), 30)
    s = stdp_baseline(pre, post, 0.02, 0.01, 20.0)[0, 0]
    print(f"{dt:+3d}  {e:+.5f}    {g:+.5f}  {s:+.5f}")

# a pair where only the receiver fires gets the Gaussian's baseline depression
silent = ssdp_gauss(np.zeros((1, 1)), one, np.zeros((1, 1, 1)), gauss_cfg)[0, 0]
print(f"\nreceiver fires, sender silent, dt=0: {silent:+.5f}")

# the vectorised rules agree with the loop reference
for line in oracle_check(trials=200, seed=0).lines():
    print(line)
