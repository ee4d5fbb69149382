"""Effective cross-resonance Hamiltonian of a two-tone drive over a halving ladder of (J, drive)."""
import argparse

from basiscycle.pulse import TwoToneSpec, commensurate_window, validate_effective_hcr


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--coupling", type=float, default=0.01)
    p.add_argument("--drive", type=float, default=0.05)
    p.add_argument("--detunings", default="1.0,0.7", help="control level detunings from the target")
    p.add_argument("--steps", type=int, default=3)
    args = p.parse_args()

    spec = TwoToneSpec(J=args.coupling, omega=args.drive,
                       control_detunings=tuple(float(x) for x in args.detunings.split(",")))
    window = commensurate_window(spec)
    print(f"window {window:.3f}")
    print(f"{'scale':>6} {'offdiag':>10} {'residual':>10}  nu / omega / delta per control level")
    for i in range(args.steps):
        f = 0.5 ** i
        rep = validate_effective_hcr(spec.scaled(f), window)
        coeffs = "  ".join(f"({n:+.2e}, {o:+.2e}, {d:+.2e})" for n, o, d in zip(rep.nu, rep.omega, rep.delta))
        print(f"{f:6.3f} {rep.offdiag_norm:10.2e} {rep.residual_norm:10.2e}  {coeffs}")


if __name__ == "__main__":
    main()
