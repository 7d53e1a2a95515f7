import numpy as np

from manp.app import loglog_slope, relax_timings
from manp.curlfree import relax
from manp.grid import EdgeField, GridSpec, cell_circulation, node_divergence
from manp.model import TanhDielectric

rng = np.random.default_rng(0)
g = GridSpec.square(0.05)
prof = TanhDielectric(1.0, 78.0)
eps = EdgeField.from_function(g, prof, prof)
D = EdgeField(rng.standard_normal(g.shape), rng.standard_normal(g.shape))

out, report = relax(D, eps, g, eps_tol=1e-8, max_sweeps=100_000, kappa=0.01)
print(f"{report.sweeps} sweeps, {report.seconds * 1e3:.1f} ms")
print("energy", report.energy_trace[0], "->", report.energy_trace[-1])
print("divergence kept:", np.abs(node_divergence(out - D, g)).max())
print("max circulation of D/eps:", np.abs(cell_circulation(out / eps, g)).max())

# cost of a fixed sweep budget grows linearly with the number of grid points
rows = relax_timings([32, 64, 128], sweeps=100)
for n, sweeps, seconds in rows:
    print(f"N={n:6d}  {seconds / (n * sweeps) * 1e9:.1f} ns per point and sweep")
print("log-log slope", loglog_slope([r[0] for r in rows], [r[2] for r in rows]))
