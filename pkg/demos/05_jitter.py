"""
Spike-time jitter
=================

Present the same images many times and measure how much each hidden
neuron's first spike moves. Latency coding is deterministic, so its jitter
is exactly zero; a rate code adds trial-to-trial variability. A pure
Bernoulli(0.5) neuron gives the reference value.
"""
import numpy as np

from ssdp.analysis import bernoulli_first_spikes, jitter, jitter_from_first_spikes
from ssdp.network import ModelSpec, init_model
from ssdp.neuron import NeuronParams, SurrogateParams

spec = ModelSpec(
    input_dim=64, hidden_dim=100, output_dim=10, T=20,
    neuron=NeuronParams(tau_m=5.0, v_th=0.3), surrogate=SurrogateParams(sigma_g=1.0), init_scale=4.0,
)
model = init_model(spec, seed=0)
images = np.random.default_rng(1).integers(0, 256, size=(20, 64), dtype=np.uint8)

for encoder in ("latency", "rate"):
    r = jitter(model, images, repeats=30, seed=0, encoder=encoder)
    print(f"{encoder:8s} mean jitter {r.mean:.3f} steps over {len(r.jitter)} responsive neurons")

control = jitter_from_first_spikes(bernoulli_first_spikes(0.5, 20, 1000, n_neurons=300), 20)
print(f"Bernoulli(0.5) control {control.mean:.3f} steps (sqrt(2) = {np.sqrt(2):.3f})")
print("histogram (0.25-step bins):", control.hist_counts.tolist())
