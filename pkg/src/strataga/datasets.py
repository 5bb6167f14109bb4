"""Bundled and generated example frames.

``iris_frame`` loads the classic 150-flower table shipped with the
package: petal length/width as targets, the sepal-length class (three
fixed bins) and the species as auxiliaries, a single domain. It is small
enough that the globally optimal design is known, which makes it the
standard correctness fixture.

``synthetic_frame`` generates a deterministic municipality-style frame:
seven uneven regions, four age-band population targets driven by a latent
size variable, and six categorical auxiliaries (18 size classes plus five
3-class land-use style variables) whose realized cross-classification
lands in the several-hundred-cell range.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from .frame import Frame, FrameSchema, load_frame

IRIS_SCHEMA = FrameSchema(
    target_columns=("PETAL_LENGTH", "PETAL_WIDTH"),
    aux_columns=("SEPAL_CLASS", "SPECIES"),
    domain_column="DOMAIN",
    id_column="ID",
)


def iris_path() -> str:
    """Filesystem path of the bundled iris CSV."""
    return str(resources.files("strataga.data").joinpath("iris.csv"))


def iris_frame() -> Frame:
    """The bundled iris frame (150 rows, 8 realized atomic strata)."""
    return load_frame(iris_path(), IRIS_SCHEMA)


SYNTHETIC_SCHEMA = FrameSchema(
    target_columns=("Y_AGE_0_19", "Y_AGE_20_39", "Y_AGE_40_64", "Y_AGE_65_UP"),
    aux_columns=("X_SIZE", "X_WOOD", "X_CULT", "X_PASTURE", "X_BUILT", "X_INDUSTRY"),
    domain_column="REGION",
)


def synthetic_frame(n_rows: int = 2896, seed: int = 20_240_517) -> Frame:
    """Deterministic municipality-style frame for engine comparisons.

    Rows get a heavy-tailed latent size; targets are age-band populations
    that split that size with noisy shares, and auxiliaries are size and
    land-use classes correlated with it. Same ``seed`` in, same frame out.
    """
    rng = np.random.default_rng(seed)
    size = np.exp(rng.normal(6.0, 1.3, size=n_rows))

    shares = rng.dirichlet((8.0, 8.5, 10.0, 6.0), size=n_rows)
    y = np.maximum(np.rint(size[:, None] * shares), 0.0)

    # 18 size classes on log-size quantiles
    qs = np.quantile(np.log(size), np.linspace(0, 1, 19)[1:-1])
    x_size = np.searchsorted(qs, np.log(size), side="right") + 1

    def landuse(scale: float) -> np.ndarray:
        # 3 classes of a noisy transform of size; many small municipalities
        # share the bottom class, which keeps the realized cell count down
        value = size * np.exp(rng.normal(0.0, scale, size=n_rows))
        lo, hi = np.quantile(value, (0.55, 0.85))
        return np.searchsorted([lo, hi], value, side="right") + 1

    x_cols = [x_size]
    for scale in (0.2, 0.25, 0.3, 0.2, 0.3):
        x_cols.append(landuse(scale))
    x = np.column_stack(x_cols).astype(object)

    region_weights = np.array([0.22, 0.19, 0.16, 0.14, 0.12, 0.10, 0.07])
    region = rng.choice(np.arange(1, 8), size=n_rows, p=region_weights)

    return Frame.from_arrays(
        y=y,
        x=x,
        domain=[f"R{r}" for r in region],
        schema=SYNTHETIC_SCHEMA,
    )
