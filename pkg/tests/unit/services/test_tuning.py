"""
Tests for the validation-split grid search.
"""

import math

import numpy as np
import pandas as pd
import pytest

from app.core.exceptions import ConvergenceError, GridSearchError, InvalidArgumentError
from app.models.data import DataSplits
from app.models.enums import PenaltyFamily, RunMode
from app.models.run import RunConfig
from app.services import tuning
from app.services.simulate import generate, prepare_splits
from app.services.tuning import GRID_COLUMNS, GridSearch, grid_search
from tests.conftest import make_tasks


@pytest.fixture
def desk_splits(desk_sim_config) -> DataSplits:
    """
    Fixture providing standardized train / validation / test splits of the desk simulation.
    """
    data, _ = generate(desk_sim_config)
    splits, _ = prepare_splits(data, (0.6, 0.2, 0.2), seed=0)
    return splits


def _cfg(**overrides) -> RunConfig:
    values = dict(
        mode=RunMode.SIMULATE,
        lambda1_grid=[1.0],
        lambda2_grid=[0.5],
        lambda3_grid=[2.0],
        k=3,
        workers=1,
    )
    values.update(overrides)
    return RunConfig(**values)


class TestGridSearch:
    """Tests for GridSearch."""

    def test_single_point_grid(self, desk_splits):
        """Test that a grid of one point selects it."""
        result = grid_search(desk_splits, _cfg())
        assert result.best.key() == (1.0, 0.5, 2.0)
        assert list(result.table.columns) == list(GRID_COLUMNS)
        assert len(result.table) == 1
        assert result.stl_W.shape == (12, 6)

    def test_selects_argmin(self, desk_splits):
        """Test that the selected point has the smallest validation loss of the table."""
        result = grid_search(desk_splits, _cfg(lambda1_grid=[0.1, 1.0], lambda3_grid=[0.5, 5.0]))
        table = result.table
        assert len(table) == 4
        best = table.loc[table["validation_loss"].idxmin()]
        assert result.best.key() == (best["lambda1"], best["lambda2"], best["lambda3"])
        assert (table["validation_loss"] >= best["validation_loss"]).all()

    def test_lambda3_walks_downward(self, desk_splits):
        """Test that each (lambda1, lambda2) pair visits lambda3 from large to small."""
        result = grid_search(desk_splits, _cfg(lambda3_grid=[0.5, 5.0, math.inf]))
        assert result.table["lambda3"].tolist() == [math.inf, 5.0, 0.5]

    def test_selects_finite_lambda3_with_outlier_tasks(self, rng):
        """Test that strong fusion with two far-away tasks prefers a finite outlier threshold."""
        W = np.vstack([np.full((8, 3), 3.0) + 0.1 * rng.standard_normal((8, 3)), [[-8.0, 8.0, -8.0], [8.0, -8.0, 8.0]]])
        splits, _ = prepare_splits(make_tasks(W, 40, rng), (0.6, 0.2, 0.2), seed=0)
        result = grid_search(splits, _cfg(lambda2_grid=[1.0], lambda3_grid=[0.5, 5.0, math.inf]))
        lambda3 = result.best.key()[2]
        assert 0 < lambda3 < math.inf
        assert {8, 9} <= set(result.fit.outlier_tasks)
        losses = result.table.set_index("lambda3")["validation_loss"]
        assert losses[lambda3] < losses[math.inf]

    def test_penalty_override(self, desk_splits):
        """Test that the penalty argument overrides the configured family."""
        result = grid_search(desk_splits, _cfg(), penalty=PenaltyFamily.GROUP_MCP)
        assert result.best.penalty.family == PenaltyFamily.GROUP_MCP

    def test_frozen_outliers(self, desk_splits):
        """Test the convex-clustering baseline: O stays zero."""
        result = grid_search(desk_splits, _cfg(), lambda3_grid=[math.inf], freeze_outliers=True)
        assert result.fit.outlier_tasks == ()
        assert (result.table["n_outliers"] == 0).all()

    def test_k_clamped_below_task_count(self, desk_splits):
        """Test that k >= T falls back to T - 1."""
        search = GridSearch(desk_splits, _cfg(k=50))
        assert search.graph.k == 11

    def test_worker_count_does_not_change_table(self, desk_splits):
        """Test that concurrent pairs give the same table as the serial search."""
        cfg = _cfg(lambda1_grid=[0.1, 1.0], lambda2_grid=[0.1, 1.0])
        serial = grid_search(desk_splits, cfg)
        threaded = grid_search(desk_splits, cfg.model_copy(update={"workers": 3}))
        pd.testing.assert_frame_equal(serial.table, threaded.table)

    def test_needs_validation_split(self, desk_splits):
        """Test that a missing validation split is rejected."""
        with pytest.raises(InvalidArgumentError):
            GridSearch(DataSplits(train=desk_splits.train), _cfg())

    def test_every_point_failing(self, desk_splits, monkeypatch):
        """Test that GridSearchError carries one diagnostic per grid point."""

        def failing_fit(*args, **kwargs):
            raise ConvergenceError("forced failure", iterations=1)

        monkeypatch.setattr(tuning, "fit", failing_fit)
        with pytest.raises(GridSearchError) as exc_info:
            grid_search(desk_splits, _cfg(lambda3_grid=[1.0, 2.0]))
        diagnostics = exc_info.value.diagnostics
        assert len(diagnostics) == 2
        assert all("forced failure" in d["error"] for d in diagnostics)
