"""
Incidence constants
===================

Monte Carlo estimates of the worst mixed-cluster mean of exp(-c_p/sigma)
for four pairs of measures, next to their closed-form upper bounds.
"""
from math import pi

from tscc.cli import example_setup
from tscc.incidence import alpha_constant, analytic_bound, mc_curvature_moment, mc_incidence_constant
from tscc.modelgen import builtin_sampler

cases = [
    ("orthogonal_lines_tscc", {"L": 1.0}),
    ("angled_lines_tlscc", {"L": 1.0, "theta": pi / 6}),
    ("rectangles_tlscc", {"omega": 20.0}),
    ("half_disks_tlscc", {}),
]
print("%-22s %6s %10s %9s %9s" % ("example", "sigma", "estimate", "std err", "bound"))
for name, geo in cases:
    samplers, d, linear, bound_kw = example_setup(name, **geo)
    for sigma in (0.05, 0.1, 0.2):
        est = mc_incidence_constant(samplers, d, sigma, linear=linear, M=50_000, seed=1)
        print("%-22s %6.2f %10.5f %9.1e %9.5f" % (name, sigma, est.value, est.std_error,
                                                   analytic_bound(name, sigma, **bound_kw)))

# curvature of the uniform unit segment as a 0-dimensional measure
seg = builtin_sampler("segment", L=1.0)
print("c_p  ", mc_curvature_moment(seg, 0, "cp", M=100_000).value, "vs 1/sqrt(3) = 0.57735")
print("c_hat", mc_curvature_moment(seg, 0, "hat", M=100_000).value, "vs sqrt(2/3) = 0.81650")

# alpha shrinks as the strips get thinner
for eps in (0.2, 0.05, 0.01):
    strips, d, linear, _ = example_setup("rectangles_tlscc", eps=eps)
    a = alpha_constant(strips, d, 0.1, linear=linear, M=20_000)
    print("eps %.2f  alpha %.3f = %.3f + %.2e" % (eps, a.alpha, a.within_term, a.incidence_term))
