"""Verify tape gradients against central finite differences.

Each case builds a small synthetic batch, runs the full dual-stream
encoder with fixed dropout masks, and compares analytic gradients of
every loss term (and their combination) against two-sided numeric
differentiation at sampled coordinates.
"""

from specnet.gradcheck import gradcheck_report


def main():
    report = gradcheck_report(seed=0, batches=5, sample_per_tensor=2)
    print(f"{report['batches']} batches, "
          f"{report['coordinates_checked']} coordinates, "
          f"step {report['step']:.0e}")
    print("worst relative error per loss:")
    for name, value in report["per_loss_max"].items():
        print(f"  {name:<15s} {value:.3e}")
    print(f"overall {report['max_relative_error']:.3e} "
          f"(threshold {report['threshold']:.0e}) -> "
          f"{'OK' if report['all_ok'] else 'FAILED'}")


if __name__ == "__main__":
    main()
