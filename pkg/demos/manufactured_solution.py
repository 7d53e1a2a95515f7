from manp import mms

# spatial refinement with dt = h^2; the errors drop four-fold per halving
rows = mms.convergence_study([0.2, 0.1, 0.05], "h^2")
print(mms.format_table(rows))

# with dt = h/10 the first-order time error takes over
rows = mms.convergence_study([0.2, 0.1, 0.05], "h/10")
print(mms.format_table(rows))

# BDF2 sampled at the end of each step keeps second order in time
finals = [mms.run_mms(0.1, dt, T=0.4, eps_tol=1e-9, integrator="bdf2")[0].c[0]
          for dt in (0.02, 0.01, 0.005)]
d1 = abs(finals[0] - finals[1]).max()
d2 = abs(finals[1] - finals[2]).max()
print(f"BDF2 successive differences {d1:.3e} {d2:.3e} ratio {d1 / d2:.2f}")
