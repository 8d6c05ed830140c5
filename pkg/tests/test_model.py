import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from afrelay import model
from afrelay.errors import ValidationError
from afrelay.model import (
    BeamformerSpec,
    ChannelConfig,
    CorrelationMatrix,
    CovarianceSpec,
    build_covariance,
    fold_forwarder,
    fold_precoder,
    format_matrix,
    parse_complex,
    parse_matrix_text,
    star_embed,
)


class TestBuildCovariance:
    def test_identity(self):
        C = build_covariance(CovarianceSpec.identity(), 3)
        np.testing.assert_array_equal(C.entries, np.eye(3))

    def test_exponential(self):
        C = build_covariance(CovarianceSpec.exponential(0.5), 2)
        np.testing.assert_array_equal(C.entries, [[1, 0.5], [0.5, 1]])

    def test_exponential_zero_is_identity(self):
        C = build_covariance(CovarianceSpec.exponential(0.0), 4)
        np.testing.assert_array_equal(C.entries, np.eye(4))

    def test_exponential_rejects_r_one(self):
        with pytest.raises(ValidationError):
            CovarianceSpec.exponential(1.0)

    def test_explicit_file(self, tmp_path):
        p = tmp_path / "r.txt"
        p.write_text("# relay receive\n1 0.5-0.25i\n\n0.5+0.25i 1\n")
        C = build_covariance(CovarianceSpec.explicit(p), 2)
        np.testing.assert_allclose(C.entries, [[1, 0.5 - 0.25j], [0.5 + 0.25j, 1]])

    @pytest.mark.parametrize(
        "text, invariant",
        [
            ("1 0.5\n0.4 1\n", "hermitian"),
            ("1 2\n2 1\n", "positive_definite"),
            ("2 0\n0 1\n", "trace"),
            ("1 0 0\n0 1 0\n0 0 1\n", "dimension"),
        ],
    )
    def test_explicit_rejections_name_the_invariant(self, tmp_path, text, invariant):
        p = tmp_path / "bad.txt"
        p.write_text(text)
        with pytest.raises(ValidationError) as info:
            build_covariance(CovarianceSpec.explicit(p), 2)
        assert info.value.invariant == invariant

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValidationError):
            build_covariance(CovarianceSpec.explicit(tmp_path / "nope.txt"), 2)

    @given(
        kind=st.sampled_from(["identity", "exponential"]),
        r=st.floats(0.0, 0.95),
        dim=st.integers(1, 10),
    )
    def test_output_always_valid(self, kind, r, dim):
        spec = CovarianceSpec.identity() if kind == "identity" else CovarianceSpec.exponential(r)
        A = build_covariance(spec, dim).entries
        assert np.allclose(A, A.conj().T, atol=1e-12, rtol=0)
        assert np.all(np.linalg.eigvalsh(A) > 0)
        assert abs(np.trace(A).real - dim) <= 1e-12 * dim


class TestMatrixText:
    @pytest.mark.parametrize(
        "tok, value",
        [("1", 1), ("-2.5", -2.5), ("1+2i", 1 + 2j), ("0.5-0.25i", 0.5 - 0.25j), ("1e-3+4E2i", 1e-3 + 400j)],
    )
    def test_entries(self, tok, value):
        assert parse_complex(tok) == value

    @pytest.mark.parametrize("tok", ["1j", "i", "1+i", "abc", "1+2", "nan"])
    def test_bad_entries(self, tok):
        with pytest.raises(ValueError):
            parse_complex(tok)

    def test_ragged(self):
        with pytest.raises(ValidationError):
            parse_matrix_text("1 2\n3\n")

    def test_roundtrip(self, rng):
        A = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
        A[0, 0] = 2.0
        np.testing.assert_array_equal(parse_matrix_text(format_matrix(A)), A)


class TestFolding:
    def test_identity_forwarder(self):
        T = CorrelationMatrix(np.eye(2))
        np.testing.assert_array_equal(fold_forwarder(T, np.eye(2)).entries, np.eye(2))

    def test_identity_forwarder_keeps_input(self):
        T = CorrelationMatrix(np.diag([1.5, 0.5]))
        np.testing.assert_array_equal(fold_forwarder(T, np.eye(2)).entries, np.diag([1.5, 0.5]))

    def test_diagonal_forwarder(self):
        # diag(a, b) I diag(a, b)^H = diag(a^2, b^2)
        F = np.diag([math.sqrt(1.5), math.sqrt(0.5)])
        out = fold_forwarder(CorrelationMatrix(np.eye(2)), F)
        np.testing.assert_allclose(out.entries, np.diag([1.5, 0.5]), atol=1e-15)
        assert not out.normalized

    def test_identity_precoder(self):
        np.testing.assert_array_equal(fold_precoder(CorrelationMatrix(np.eye(3)), np.eye(3)).entries, np.eye(3))

    def test_precoder_trace_condition(self):
        with pytest.raises(ValidationError) as info:
            fold_precoder(CorrelationMatrix(np.eye(1)), np.array([[math.sqrt(2)]]))
        assert info.value.invariant == "trace"

    def test_precoder_on_exponential(self):
        T = build_covariance(CovarianceSpec.exponential(0.5), 2)
        np.testing.assert_array_equal(fold_precoder(T, np.eye(2)).entries, [[1, 0.5], [0.5, 1]])

    def test_singular_forwarder(self):
        F = np.diag([math.sqrt(2), 0.0])
        with pytest.raises(ValidationError, match="effective covariance not positive definite"):
            fold_forwarder(CorrelationMatrix(np.eye(2)), F)

    @given(r=st.floats(0.0, 0.95), dim=st.integers(1, 8))
    def test_identity_fold_is_exact(self, r, dim):
        T = build_covariance(CovarianceSpec.exponential(r), dim)
        np.testing.assert_array_equal(fold_forwarder(T, np.eye(dim)).entries, T.entries)


class TestStarEmbed:
    def test_scalar(self):
        np.testing.assert_array_equal(star_embed(np.array([[2.0]]), 2), [[2, 0], [0, 0]])

    def test_same_size_untouched(self):
        np.testing.assert_array_equal(star_embed(np.eye(3), 3), np.eye(3))

    def test_corner(self):
        A = np.array([[1, 0.5], [0.5, 1]])
        np.testing.assert_array_equal(star_embed(A, 3), [[1, 0.5, 0], [0.5, 1, 0], [0, 0, 0]])

    def test_too_small(self):
        with pytest.raises(ValidationError):
            star_embed(np.eye(3), 2)

    @given(r=st.floats(0.0, 0.9), a=st.integers(1, 6), extra=st.integers(0, 4))
    def test_spectrum(self, r, a, extra):
        A = build_covariance(CovarianceSpec.exponential(r), a).entries.real
        E = star_embed(A, a + extra)
        expected = np.sort(np.concatenate([np.linalg.eigvalsh(A), np.zeros(extra)]))
        np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(E)), expected, atol=1e-12)


class TestChannelConfig:
    def test_defaults(self):
        c = ChannelConfig(2, 2, 2, 1.0, 1.0)
        assert c.cov_Rd.kind == "identity"
        assert c.precoder.kind == "identity"
        assert c.s2_variant is model.S2Variant.SCALAR_CONSISTENT
        assert c.star_dim == 2

    @pytest.mark.parametrize(
        "kw, name",
        [
            (dict(n_s=0), "n_s"),
            (dict(n_r=-1), "n_r"),
            (dict(n_d=1.5), "n_d"),
            (dict(rho=-0.1), "rho"),
            (dict(alpha=0.0), "alpha"),
            (dict(rho=float("inf")), "rho"),
        ],
    )
    def test_invalid(self, kw, name):
        args = dict(n_s=2, n_r=2, n_d=2, rho=1.0, alpha=1.0)
        args.update(kw)
        with pytest.raises(ValidationError) as info:
            ChannelConfig(**args)
        assert info.value.invariant == name

    def test_effective_covariances_fold_beamformers(self, tmp_path):
        p = tmp_path / "f.txt"
        p.write_text(format_matrix(np.diag([math.sqrt(1.5), math.sqrt(0.5)])))
        c = ChannelConfig(2, 2, 2, 1.0, 1.0, forwarder=BeamformerSpec.explicit(p))
        covs = c.effective_covariances()
        np.testing.assert_allclose(covs.T_r.entries, np.diag([1.5, 0.5]), atol=1e-15)
        np.testing.assert_array_equal(covs.T_s.entries, np.eye(2))

    def test_beamformer_dimension_checked(self):
        c = ChannelConfig(2, 3, 2, 1.0, 1.0, forwarder=BeamformerSpec.explicit(np.eye(2)))
        with pytest.raises(ValidationError):
            c.effective_covariances()
