"""Iteration-count comparison: scaling policy iteration versus value
iteration over randomized starts.

Both solvers accept an arbitrary start.  For each trial a random
positive definite seed matrix defines the starting gain; the solvers
run until their gain is within 1e-4 of the optimum.  The data-driven
solver's divisor probes are counted as iterations, and it still needs
an order of magnitude fewer steps than value iteration.
"""

import time

import numpy as np

from spilqr import benchmarks, lti, model_free, riccati

sys_d = benchmarks.power_plant()
weights = benchmarks.power_plant_weights()
ref = riccati.value_iteration(sys_d, weights, tol=1e-12)
print("reference gain:", np.round(ref.K.ravel(), 4))

policy = lti.exploration_input(1, seed=7)
traj = lti.simulate(sys_d, benchmarks.POWER_PLANT_X0, policy, 30)
data = model_free.build_regression_data(traj)

TRIALS = 100
GAIN_TOL = 1e-4
results = {"spi-model-free": {"iters": [], "time": 0.0},
           "vi": {"iters": [], "time": 0.0}}

for ss in np.random.SeedSequence(2024).spawn(TRIALS):
    rng = np.random.default_rng(ss)
    G = rng.standard_normal((3, 3))
    P0 = G.T @ G + 1e-3 * np.eye(3)
    K0 = riccati.optimal_gain(sys_d, weights, P0)

    t0 = time.perf_counter()
    report = model_free.spi_model_free(data, K0, weights, b_init=1.0,
                                       delta=lambda i: 0.7 * i, tol=1e-9)
    results["spi-model-free"]["time"] += time.perf_counter() - t0
    gains = [K0] + report.gain_sequence()
    hit = next(i for i, K in enumerate(gains)
               if np.linalg.norm(K - ref.K) < GAIN_TOL)
    results["spi-model-free"]["iters"].append(hit + report.probes)

    t0 = time.perf_counter()
    sol = riccati.value_iteration(sys_d, weights, P0=P0, tol=1e-9)
    results["vi"]["time"] += time.perf_counter() - t0
    gains = [K for _, K in sol.trace] + [sol.K]
    hit = next(i for i, K in enumerate(gains)
               if np.linalg.norm(K - ref.K) < GAIN_TOL)
    results["vi"]["iters"].append(hit)

print(f"\n{TRIALS} random starts, converged when |K - K*| < {GAIN_TOL:g}:")
print(f"{'solver':>16}  {'mean iterations':>16}  {'mean time':>10}")
for name, r in results.items():
    mean_it = np.mean(r["iters"])
    mean_ms = 1e3 * r["time"] / TRIALS
    print(f"{name:>16}  {mean_it:>16.1f}  {mean_ms:>8.2f} ms")
ratio = np.mean(results["vi"]["iters"]) / \
    np.mean(results["spi-model-free"]["iters"])
print(f"\nvalue iteration needs {ratio:.1f}x more iterations")
