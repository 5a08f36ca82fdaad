"""Contrastive-loss oracles: exact scalar cases, limits, and gradients.

The independent oracle is a direct double-loop transcription of the
symmetric temperature-scaled softmax loss over cosine similarities; the
implementation under test is vectorized torch.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
import torch

from vtlab.errors import UsageError
from vtlab.pretrain import ReprModel, clip_loss, clip_loss_terms, fuse
from vtlab.pretrain.model import EmbeddingBatch, Role


def scalar_clip_loss(f: np.ndarray, v: np.ndarray, tau: float) -> float:
    """Independent reference: explicit per-row softmax cross-entropies."""
    n = f.shape[0]

    def cos(a, b):
        return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))

    loss_fv = 0.0
    for i in range(n):
        logits = [cos(f[i], v[j]) / tau for j in range(n)]
        loss_fv += -(logits[i] - math.log(sum(math.exp(z) for z in logits)))
    loss_vf = 0.0
    for i in range(n):
        logits = [cos(v[i], f[j]) / tau for j in range(n)]
        loss_vf += -(logits[i] - math.log(sum(math.exp(z) for z in logits)))
    return 0.5 * (loss_fv + loss_vf) / n


def random_unit(n, d, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


class TestExactCases:
    def test_single_pair_loss_is_zero(self):
        f = random_unit(1, 16, 0)
        assert float(clip_loss(f, random_unit(1, 16, 1), tau=0.3)) == 0.0

    def test_two_orthonormal_matched_pairs(self):
        f = np.eye(2)
        v = np.eye(2)
        expected = math.log(1.0 + math.exp(-1.0))
        got = float(clip_loss(f, v, tau=1.0))
        assert got == pytest.approx(expected, abs=1e-7)
        assert got == pytest.approx(scalar_clip_loss(f, v, 1.0), abs=1e-6)

    def test_matches_scalar_oracle_on_random_batches(self):
        for seed in range(5):
            f = random_unit(6, 12, seed)
            v = random_unit(6, 12, seed + 100)
            got = float(clip_loss(f, v, tau=0.5))
            assert got == pytest.approx(scalar_clip_loss(f, v, 0.5), rel=1e-6)

    def test_random_embeddings_near_log_n(self):
        losses = [float(clip_loss(random_unit(64, 128, s), random_unit(64, 128, s + 500),
                                  tau=1.0)) for s in range(100)]
        assert abs(float(np.mean(losses)) - math.log(64)) < 0.15

    def test_empty_batch_rejected(self):
        with pytest.raises(UsageError):
            clip_loss(np.zeros((0, 8)), np.zeros((0, 8)), tau=1.0)

    def test_batch_size_mismatch_rejected(self):
        with pytest.raises(UsageError):
            clip_loss(random_unit(3, 8, 0), random_unit(4, 8, 1), tau=1.0)


class TestInvariants:
    def test_symmetry_of_directional_terms(self):
        f = random_unit(8, 16, 2)
        v = random_unit(8, 16, 3)
        l_fv, l_vf = clip_loss_terms(f, v, tau=0.7)
        total = float(clip_loss(f, v, tau=0.7))
        assert total == pytest.approx(0.5 * (float(l_fv) + float(l_vf)), rel=1e-7)
        # swapping the roles of the directional terms leaves the total unchanged
        swapped = 0.5 * (float(l_vf) + float(l_fv))
        assert total == pytest.approx(swapped, rel=1e-12)

    def test_permutation_equivariance(self):
        f = random_unit(16, 32, 4)
        v = random_unit(16, 32, 5)
        perm = np.random.default_rng(6).permutation(16)
        a = float(clip_loss(f, v, tau=0.2))
        b = float(clip_loss(f[perm], v[perm], tau=0.2))
        assert a == pytest.approx(b, rel=1e-6)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_matched_pairs_minimize_loss_on_2d_grid(self, n):
        """Brute force over a discretized circle: the minimizing assignment
        aligns each fused vector with its paired target."""
        angles = np.linspace(0.0, 2.0 * np.pi, 12, endpoint=False)
        v_angles = angles[:: 12 // n][:n]  # targets evenly separated
        v = np.stack([np.cos(v_angles), np.sin(v_angles)], axis=1)
        best, best_f = np.inf, None
        for combo in itertools.product(range(12), repeat=n):
            f_angles = angles[list(combo)]
            f = np.stack([np.cos(f_angles), np.sin(f_angles)], axis=1)
            loss = float(clip_loss(f, v, tau=0.5))
            if loss < best - 1e-12:
                best, best_f = loss, f
        cosines = np.sum(best_f * v, axis=1)
        assert np.allclose(cosines, 1.0, atol=1e-9)


class TestGradients:
    def test_loss_gradient_matches_finite_differences(self):
        torch.manual_seed(0)
        f = torch.nn.functional.normalize(torch.randn(4, 8, dtype=torch.float64), dim=1)
        v = torch.nn.functional.normalize(torch.randn(4, 8, dtype=torch.float64), dim=1)
        f.requires_grad_(True)
        loss = clip_loss(f, v, tau=0.5)
        loss.backward()
        analytic = f.grad.clone()

        eps = 1e-6
        for i, j in [(0, 0), (1, 3), (2, 5), (3, 7)]:
            fp = f.detach().clone()
            fm = f.detach().clone()
            fp[i, j] += eps
            fm[i, j] -= eps
            num = (float(clip_loss(fp, v, 0.5)) - float(clip_loss(fm, v, 0.5))) / (2 * eps)
            assert num == pytest.approx(float(analytic[i, j]), rel=1e-4, abs=1e-8)

    def test_fusion_gradient_matches_finite_differences(self):
        torch.manual_seed(1)
        model = ReprModel(embed_dim=16, vision_res=16, patch_size=8, tactile_res=16).double()
        v = torch.nn.functional.normalize(torch.randn(4, 16, dtype=torch.float64), dim=1)
        t = torch.nn.functional.normalize(torch.randn(4, 16, dtype=torch.float64), dim=1)
        v_next = torch.nn.functional.normalize(torch.randn(4, 16, dtype=torch.float64), dim=1)

        def loss_value():
            fused = model.fuse_embeddings(v, t)
            return clip_loss(fused, v_next, tau=0.5)

        loss = loss_value()
        loss.backward()
        weight = model.fusion.proj.weight
        analytic = weight.grad.clone()

        eps = 1e-6
        for i, j in [(0, 0), (5, 7), (11, 20), (15, 31)]:
            with torch.no_grad():
                weight[i, j] += eps
                up = float(loss_value())
                weight[i, j] -= 2 * eps
                down = float(loss_value())
                weight[i, j] += eps
            num = (up - down) / (2 * eps)
            assert num == pytest.approx(float(analytic[i, j]), rel=1e-4, abs=1e-9)


class TestFuseOp:
    def test_shapes_and_unit_rows(self, tiny_repr):
        v = EmbeddingBatch(random_unit(5, tiny_repr.embed_dim, 0).astype(np.float32),
                           Role.V_CURRENT_MASKED)
        t = EmbeddingBatch(random_unit(5, tiny_repr.embed_dim, 1).astype(np.float32), Role.T)
        fused = fuse(tiny_repr, v, t)
        assert fused.vectors.shape == (5, tiny_repr.embed_dim)
        assert np.allclose(np.linalg.norm(fused.vectors, axis=1), 1.0, atol=1e-5)
        assert fused.role == Role.F

    def test_batch_independence_under_permutation(self, tiny_repr):
        v = EmbeddingBatch(random_unit(6, tiny_repr.embed_dim, 2).astype(np.float32),
                           Role.V_CURRENT_MASKED)
        t = EmbeddingBatch(random_unit(6, tiny_repr.embed_dim, 3).astype(np.float32), Role.T)
        fused = fuse(tiny_repr, v, t).vectors
        perm = np.array([3, 1, 5, 0, 2, 4])
        fused_perm = fuse(tiny_repr, EmbeddingBatch(v.vectors[perm], Role.V_CURRENT_MASKED),
                          EmbeddingBatch(t.vectors[perm], Role.T)).vectors
        assert np.allclose(fused_perm, fused[perm], atol=1e-6)

    def test_batch_mismatch_rejected(self, tiny_repr):
        v = EmbeddingBatch(random_unit(3, tiny_repr.embed_dim, 0).astype(np.float32),
                           Role.V_CURRENT_MASKED)
        t = EmbeddingBatch(random_unit(4, tiny_repr.embed_dim, 1).astype(np.float32), Role.T)
        with pytest.raises(UsageError):
            fuse(tiny_repr, v, t)
