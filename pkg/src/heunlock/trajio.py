"""Fixed-schema trajectory CSV shared by the analytic and oracle paths.

Keeping the writer in a neutral module lets the integration oracle emit
byte-compatible files without importing any of the series machinery.
"""

TRAJECTORY_HEADER = "t,re_exp_iphi,im_exp_iphi,phi_unwrapped"


def write_trajectory_csv(path, ts, exp_vals, phi_vals):
    with open(path, "w", newline="") as fh:
        fh.write(TRAJECTORY_HEADER + "\n")
        for t, e, p in zip(ts, exp_vals, phi_vals):
            fh.write(f"{t:.17g},{e.real:.17g},{e.imag:.17g},{p:.17g}\n")
