import io

import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from odeworkbench.config import builtin_matrix, load_config, parse_config, require, snapshot
from odeworkbench.errors import InputError
from odeworkbench.mmio import format_matrix_market, read_matrix_market, write_matrix_market

floats = st.floats(allow_nan=False, allow_infinity=False, width=64)


def roundtrip(M):
    return read_matrix_market(io.StringIO(format_matrix_market(M)))


class TestMatrixMarket:
    def test_coordinate_real(self):
        text = "%%MatrixMarket matrix coordinate real general\n% c\n2 2 2\n1 1 1.5\n2 1 -2\n"
        M = read_matrix_market(io.StringIO(text))
        assert sp.issparse(M)
        np.testing.assert_array_equal(M.toarray(), [[1.5, 0], [-2, 0]])

    def test_symmetric_and_skew(self):
        sym = "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1\n2 1 3\n"
        np.testing.assert_array_equal(read_matrix_market(io.StringIO(sym)).toarray(), [[1, 3], [3, 0]])
        skew = "%%MatrixMarket matrix array real skew-symmetric\n2 2\n4\n"
        np.testing.assert_array_equal(read_matrix_market(io.StringIO(skew)), [[0, -4], [4, 0]])

    def test_hermitian_complex(self):
        text = "%%MatrixMarket matrix coordinate complex hermitian\n2 2 2\n1 1 1 0\n2 1 0 2\n"
        M = read_matrix_market(io.StringIO(text)).toarray()
        np.testing.assert_array_equal(M, [[1, -2j], [2j, 0]])

    def test_pattern_and_integer(self):
        pat = "%%MatrixMarket matrix coordinate pattern general\n2 2 1\n1 2\n"
        assert read_matrix_market(io.StringIO(pat)).toarray()[0, 1] == 1.0
        it = "%%MatrixMarket matrix array integer general\n1 2\n3\n-4\n"
        np.testing.assert_array_equal(read_matrix_market(io.StringIO(it)), [[3, -4]])

    def test_agrees_with_scipy(self, tmp_path, rng):
        M = sp.random(7, 7, density=0.3, random_state=1, format="csr")
        p = tmp_path / "m.mtx"
        scipy.io.mmwrite(str(p), M)
        np.testing.assert_allclose(read_matrix_market(p).toarray(), M.toarray())

    @pytest.mark.parametrize(
        "text,line,col",
        [
            ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 1.0\n", 3, 3),
            ("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n", 3, 1),
            ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n", 3, 1),
            ("%%MatrixMarket matrix coordinate real foo\n1 1 0\n", 1, 39),
            ("%%MatrixMarket matrix array real general\n2 1\n1.0\n2.0abc\n", 4, 1),
            ("not a header\n", 1, 1),
        ],
    )
    def test_errors_carry_position(self, text, line, col):
        with pytest.raises(InputError) as ei:
            read_matrix_market(io.StringIO(text))
        assert ei.value.line == line and ei.value.column == col

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 4)), elements=floats))
    def test_dense_roundtrip_bit_exact(self, M):
        back = roundtrip(M)
        assert back.dtype == np.float64
        np.testing.assert_array_equal(back, M)
        assert format_matrix_market(back) == format_matrix_market(M)

    @settings(max_examples=30, deadline=None)
    @given(arrays(np.complex128, (3, 3), elements=st.complex_numbers(allow_nan=False, allow_infinity=False, max_magnitude=1e300)))
    def test_sparse_complex_roundtrip(self, M):
        S = sp.csr_matrix(M)
        back = roundtrip(S)
        np.testing.assert_array_equal(back.toarray(), S.toarray())

    def test_file_roundtrip(self, tmp_path):
        M = np.array([[0.1, 1 / 3], [np.pi, -1e-300]])
        p = write_matrix_market(tmp_path / "x.mtx", M, comment="two\nlines")
        text = open(p).read()
        assert text.startswith("%%MatrixMarket matrix array real general\n% two\n% lines\n")
        np.testing.assert_array_equal(read_matrix_market(p), M)


class TestConfig:
    def test_values(self, tmp_path):
        mtx = tmp_path / "a.mtx"
        write_matrix_market(mtx, sp.csr_matrix(np.array([[-1.0, 0.0], [0.5, -2.0]])))
        cfg_path = tmp_path / "p.cfg"
        cfg_path.write_text("# comment\nA = @a.mtx\nB = [1, 2; 3, 4]\nx0 = [1, -1]  # trailing\nT = 2.5\nz = 1+2j\nM = twisted:5\n")
        cfg = load_config(str(cfg_path))
        assert sp.issparse(cfg["A"].value)
        np.testing.assert_array_equal(cfg["B"].value, [[1, 2], [3, 4]])
        np.testing.assert_array_equal(cfg["x0"].value, [1, -1])
        assert cfg["T"].value == 2.5 and cfg["T"].line == 5
        assert cfg["z"].value == 1 + 2j
        assert cfg["M"].value.shape == (5, 5)

    @pytest.mark.parametrize(
        "text,line,col",
        [
            ("A = [1, 2; 3]\n", 1, 5),
            ("T = 1\nT = 2\n", 2, 1),
            ("x = [1, , 2]\n", 1, 9),
            ("\n\njust words\n", 3, 1),
            ("T = abc\n", 1, 5),
            ("M = nosuch:3\n", 1, 5),
        ],
    )
    def test_errors(self, text, line, col):
        with pytest.raises(InputError) as ei:
            parse_config(text)
        assert (ei.value.line, ei.value.column) == (line, col)

    def test_require(self):
        cfg = parse_config("A = 1\nbogus = 2\n")
        with pytest.raises(InputError, match="unknown key"):
            require(cfg, {"A": ""}, ("A",))
        with pytest.raises(InputError, match="missing"):
            require(parse_config("A = 1\n"), {"A": "", "T": ""}, ("A", "T"))

    def test_snapshot(self):
        snap = snapshot({"b": np.array([1.0, 2.0]), "a": 1 + 1j, "c": sp.identity(2)})
        assert list(snap) == ["a", "b", "c"]
        assert snap["a"] == [1.0, 1.0] and snap["c"] == [[1.0, 0.0], [0.0, 1.0]]

    def test_builtins(self):
        A, B = builtin_matrix("fig1:A"), builtin_matrix("fig1:B")
        assert A[0, 1] == 10 and B[0, 1] == 1
        assert builtin_matrix("zero:3").shape == (3, 3)
        assert builtin_matrix("other") is None
