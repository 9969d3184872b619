import numpy as np
import pytest

from dilatedpocs import LinearSystem, SparseMatrix

# 5x2 reference system: A = [[1,0],[0,1],[1,1],[1,1],[1,1]], y = [0,0,1,2,7].
# Least-squares solution [10/7, 10/7] with residual norm 5.0427; the minimax
# value is 3.0, attained (among others) at [2, 2].
REF_A = np.array([[1.0, 0.0],
                  [0.0, 1.0],
                  [1.0, 1.0],
                  [1.0, 1.0],
                  [1.0, 1.0]])
REF_Y = np.array([0.0, 0.0, 1.0, 2.0, 7.0])


@pytest.fixture(scope="session")
def ref_system():
    return LinearSystem(SparseMatrix.from_dense(REF_A), REF_Y)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
