"""Shared test helpers: tiny translation nets, the pure (detach-free) total
loss used for gradient checking, and a small HTTP client."""
from __future__ import annotations

import json
import urllib.error
import urllib.request

import numpy as np
import torch

from cellbloom.transfer import DiscriminatorSpec, GeneratorSpec, adversarial_loss, cycle_loss
from cellbloom.transfer.networks import build_discriminator, build_generator, init_weights

TINY_GEN = GeneratorSpec(base_width=4, n_blocks=1)
TINY_DISC = DiscriminatorSpec(base_width=4, n_down=1)


def build_tiny_nets(seed: int = 0, dtype=torch.float32):
    """Width-4 generator/discriminator pair suited to 8x8 inputs."""
    torch.manual_seed(seed)
    nets = [
        init_weights(build_generator(TINY_GEN)),
        init_weights(build_generator(TINY_GEN)),
        init_weights(build_discriminator(TINY_DISC)),
        init_weights(build_discriminator(TINY_DISC)),
    ]
    for n in nets:
        n.to(dtype)
    return nets


def total_step_loss(nets, real_a, real_b, lambda_cycle=10.0):
    """Sum of every term optimized in one train step, as a single
    differentiable graph (no detach), for gradient verification."""
    g_ab, g_ba, d_a, d_b = nets
    fake_b = g_ab(real_a)
    rec_a = g_ba(fake_b)
    fake_a = g_ba(real_b)
    rec_b = g_ab(fake_a)
    gen = (
        adversarial_loss(d_b(fake_b), target_real=True)
        + adversarial_loss(d_a(fake_a), target_real=True)
        + lambda_cycle * (cycle_loss(real_a, rec_a) + cycle_loss(real_b, rec_b))
    )
    disc = 0.5 * (
        adversarial_loss(d_a(real_a), True) + adversarial_loss(d_a(fake_a), False)
    ) + 0.5 * (adversarial_loss(d_b(real_b), True) + adversarial_loss(d_b(fake_b), False))
    return gen + disc


def sample_parameter_elements(params, n, seed=7):
    """n (param_index, element_index) picks, uniform over all elements."""
    sizes = np.array([p.numel() for p in params])
    cum = np.cumsum(sizes)
    rng = np.random.default_rng(seed)
    picks = []
    for k in rng.choice(int(cum[-1]), size=n, replace=False):
        pi = int(np.searchsorted(cum, k, side="right"))
        picks.append((pi, int(k - (cum[pi - 1] if pi else 0))))
    return picks


def gradient_check(dtype, rtol, n_samples=40, h=1e-6, lambda_cycle=10.0, seed=0):
    """Compare autograd gradients at `dtype` against central finite
    differences evaluated on a float64 twin holding the same parameter
    values (float32 arithmetic cannot resolve the differences itself).
    Returns the list of relative errors."""
    nets = build_tiny_nets(seed=seed, dtype=dtype)
    nets64 = build_tiny_nets(seed=seed, dtype=torch.float64)
    for n32, n64 in zip(nets, nets64):
        n64.load_state_dict({k: v.double() for k, v in n32.state_dict().items()})

    rng = np.random.default_rng(42)
    a = torch.tensor(rng.uniform(-1, 1, (2, 3, 8, 8)), dtype=dtype)
    b = torch.tensor(rng.uniform(-1, 1, (2, 3, 8, 8)), dtype=dtype)
    a64, b64 = a.double(), b.double()

    params = [p for net in nets for p in net.parameters()]
    params64 = [p for net in nets64 for p in net.parameters()]
    loss = total_step_loss(nets, a, b, lambda_cycle)
    grads = torch.autograd.grad(loss, params)

    rel_errors = []
    with torch.no_grad():
        for pi, i in sample_parameter_elements(params, n_samples):
            p64 = params64[pi]
            orig = p64.view(-1)[i].item()
            p64.view(-1)[i] = orig + h
            up = total_step_loss(nets64, a64, b64, lambda_cycle).item()
            p64.view(-1)[i] = orig - h
            down = total_step_loss(nets64, a64, b64, lambda_cycle).item()
            p64.view(-1)[i] = orig
            fd = (up - down) / (2 * h)
            an = grads[pi].view(-1)[i].item()
            rel_errors.append(abs(fd - an) / max(abs(fd), abs(an), 1e-3))
    assert max(rel_errors) <= rtol, f"worst relative error {max(rel_errors):.3e} > {rtol}"
    return rel_errors


# ---------- tiny HTTP client ----------


def http_get(url: str, headers: dict | None = None):
    req = urllib.request.Request(url, headers=headers or {})
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, resp.read()
    except urllib.error.HTTPError as exc:
        return exc.code, exc.read()


def http_post_json(url: str, body: dict):
    req = urllib.request.Request(
        url,
        data=json.dumps(body).encode("utf-8"),
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    try:
        with urllib.request.urlopen(req) as resp:
            return resp.status, json.loads(resp.read() or b"{}")
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read() or b"{}")
