import numpy as np

from strataga.datasets import iris_frame, synthetic_frame
from strataga.frame import split_domains
from strataga.strata import build_atomic_strata


def test_iris_frame_shape(iris):
    assert iris.n_rows == 150
    assert iris.schema.target_columns == ("PETAL_LENGTH", "PETAL_WIDTH")
    assert iris.x_categories[1] == ("setosa", "versicolor", "virginica")
    # 52/63/35 rows per sepal-length class
    counts = np.bincount(iris.x[:, 0])
    assert counts.tolist() == [52, 63, 35]


def test_synthetic_frame_shape():
    frame = synthetic_frame()
    assert frame.n_rows == 2896
    assert frame.n_targets == 4
    assert len(frame.domain_labels) == 7
    domains = split_domains(frame)
    cells = [build_atomic_strata(d).size for d in domains]
    # several hundred realized cells across seven uneven regions
    assert 500 <= sum(cells) <= 800
    assert all(c >= 50 for c in cells)
    # the 18-class size variable is fully populated
    assert len(frame.x_categories[0]) == 18
    assert all(len(cats) == 3 for cats in frame.x_categories[1:])


def test_synthetic_frame_is_deterministic():
    a = synthetic_frame()
    b = synthetic_frame()
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.domain, b.domain)
    c = synthetic_frame(seed=1)
    assert not np.array_equal(a.y, c.y)


def test_synthetic_targets_are_estimable():
    frame = synthetic_frame()
    assert (frame.y.sum(axis=0) > 0).all()
