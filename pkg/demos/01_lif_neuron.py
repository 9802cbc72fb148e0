"""
A single leaky integrate-and-fire neuron
========================================

Drive one neuron with a constant current and watch it integrate, cross
threshold and reset. Then look at the surrogate derivative used in place
of the step function during backprop.
"""
import numpy as np

from ssdp.neuron import MembraneState, NeuronParams, SurrogateParams, step, surrogate_grad

params = NeuronParams(tau_m=5.0, v_th=1.0)
state = MembraneState.zeros((1, 1))

# a constant input of 1.5 settles the dendrite at 1.5, so the membrane
# climbs past v_th = 1.0 every few steps
for t in range(20):
    state, s = step(state, np.array([[1.5]]), params)
    bar = "#" * int(round(20 * max(state.m[0, 0], 0)))
    print(f"t={t:2d} m={state.m[0, 0]:.3f} spike={int(s[0, 0])} {bar}")

# the surrogate peaks at threshold and dips below zero on both flanks
v = np.linspace(-1, 3, 9)
print()
for vi, g in zip(v, surrogate_grad(v, SurrogateParams(), v_th=1.0)):
    print(f"v={vi:+.1f}  dS/dv={g:+.4f}")
