import numpy as np

from manp.grid import EdgeField, GridSpec
from manp.model import uniform_params
from manp.np_scheme import b_function, bernoulli, compute_fluxes

z = np.array([-40.0, -5.0, -1e-6, 0.0, 1e-6, 5.0, 40.0, 800.0])
print("z        B(z)")
for zi, bi in zip(z, bernoulli(z)):
    print(f"{zi:8g} {bi:.6e}")

# every mean satisfies B(-z) = e^z B(z); they only differ in how fast they decay
for kind in ("entropic", "arithmetic", "geometric", "harmonic"):
    b = b_function(kind, z[:-1])
    gap = np.abs(b_function(kind, -z[:-1]) - np.exp(z[:-1]) * b).max()
    print(f"{kind:10s} B(5)={b_function(kind, np.array(5.0)):.4f}  reflection gap {gap:.1e}")

# without drive the flux is the plain Fick difference quotient
g = GridSpec(8, 8, 1.0, 1.0)
X, _ = g.node_coords()
c = 1.0 + 0.1 * np.sin(2 * np.pi * X)
J = compute_fluxes(c, EdgeField.zeros(g), "entropic", uniform_params(kappa=1.0), g)
fick = -(np.roll(c, -1, axis=0) - c) / g.dx
print("max |J - fick| =", np.abs(J.x - fick).max())
