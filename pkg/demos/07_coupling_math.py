"""The numerics behind coupling a speech encoder to a text decoder.

Four pieces: an adapter (layer norm + bottleneck MLP + residual) with a
hand-rolled backward pass, a stride-2 conv stack that shrinks the frame
sequence 8x, a parameter inventory with the LNA fine-tuning mask, and
the tri-stage learning rate schedule. All plain numpy.
"""

import numpy as np

from stforge.coupling import (
    AdapterParams,
    LengthAdaptorParams,
    TriStageConfig,
    adapter_backward,
    adapter_forward,
    adapter_param_count,
    build_reference_inventory,
    group_counts,
    length_adaptor_forward,
    length_adaptor_output_length,
    lna_trainable_mask,
    tri_stage_lr,
)


def main():
    print(f"adapter at d=1024, h=4096: {adapter_param_count(1024, 4096):,} parameters")

    rng = np.random.default_rng(0)
    p = AdapterParams(
        ln_gain=np.ones(4), ln_bias=np.zeros(4),
        w_up=0.5 * rng.standard_normal((8, 4)), b_up=rng.standard_normal(8),
        w_down=0.5 * rng.standard_normal((4, 8)), b_down=np.zeros(4),
    )
    x = rng.standard_normal((6, 4))
    y = adapter_forward(x, p)
    grad_x, grad_p = adapter_backward(x, p, np.ones_like(y))
    print(f"forward keeps shape {x.shape} -> {y.shape}; backward grad_x norm {np.linalg.norm(grad_x):.3f}")

    # finite-difference spot check on one weight
    eps = 1e-6
    bumped = AdapterParams(
        p.ln_gain, p.ln_bias,
        p.w_up + eps * (np.arange(32).reshape(8, 4) == 0), p.b_up, p.w_down, p.b_down,
    )
    fd = (adapter_forward(x, bumped).sum() - y.sum()) / eps
    print(f"dL/dw_up[0,0]: analytic {grad_p.w_up[0, 0]:+.6f}, finite difference {fd:+.6f}")

    frames = rng.standard_normal((800, 16))
    shrunk = length_adaptor_forward(frames, LengthAdaptorParams.zeros(16))
    print(f"\nlength adaptor: {frames.shape[0]} frames -> {shrunk.shape[0]} "
          f"(formula says {length_adaptor_output_length(800)})")

    inv = lna_trainable_mask(build_reference_inventory())
    print(f"\nreference model: {inv.total_params():,} parameters, "
          f"{inv.trainable_params():,} trainable ({inv.trainable_fraction():.1%}) under LNA")
    for group, (total, trainable) in sorted(group_counts(inv).items()):
        if trainable:
            print(f"  {group:35s} {trainable:>12,} of {total:,}")

    cfg = TriStageConfig(total_steps=100_000)
    print("\ntri-stage schedule (warmup, hold, exponential decay):")
    for step in (0, 7_500, 15_000, 30_000, 65_000, 100_000):
        print(f"  step {step:>6d}: lr = {tri_stage_lr(step, cfg):.2e}")


if __name__ == "__main__":
    main()
