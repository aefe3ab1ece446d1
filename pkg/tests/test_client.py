import io
import logging
import warnings

import numpy as np
import pytest

from src.client.errors import (
    ConfigError,
    EDLError,
    InvariantError,
    ShapeError,
    SolverDivergenceError,
)
from src.client.logging import InterceptHandler, Logging, warning_text
from src.main import Harness
from src.utils.conv_ops import operator_norm_sq


def test_exit_codes():
    assert EDLError.exit_code == 1
    assert ConfigError("x").exit_code == 2
    assert ShapeError("x").exit_code == 2
    assert InvariantError("x").exit_code == 4
    error = SolverDivergenceError(7, "objective", "epoch")
    assert (error.exit_code, error.step, error.quantity) == (3, 7, "objective")
    assert str(error) == "Non-finite objective at epoch 7."
    assert str(SolverDivergenceError(2, "code")) == "Non-finite code at step 2."


def test_error_hierarchy():
    assert issubclass(ShapeError, ConfigError)
    assert issubclass(ConfigError, ValueError)
    with pytest.raises(ArithmeticError):
        raise SolverDivergenceError(1, "code")


def test_private_logger_levels():
    sink = io.StringIO()
    logger = Logging(debug_mode=False, format="{level}|{message}", sink=sink).get_logger()
    logger.debug("hidden")
    logger.info("shown")
    assert sink.getvalue() == "INFO|shown\n"

    sink = io.StringIO()
    logger = Logging(debug_mode=True, format="{level}|{message}", sink=sink).get_logger()
    logger.debug("visible")
    assert sink.getvalue().splitlines()[-1] == "DEBUG|visible"


def test_intercept_handler_forwards_standard_logging():
    sink = io.StringIO()
    logger = Logging(format="{level}|{message}", sink=sink).get_logger()
    std = logging.getLogger("edl-test")
    std.propagate = False
    std.addHandler(InterceptHandler(logger))
    std.setLevel(logging.INFO)
    std.warning("from the standard library")
    assert sink.getvalue() == "WARNING|from the standard library\n"


def test_warning_text():
    formatted = "/src/utils/conv_ops.py:199: RuntimeWarning: zero: dictionary.\n  warnings.warn(...)\n"
    assert warning_text(formatted) == "RuntimeWarning: zero: dictionary."
    assert warning_text("") == ""


def test_harness_routes_warnings_to_its_logger():
    logging.captureWarnings(False)
    harness = Harness()
    sink = io.StringIO()
    harness.logger.add(sink, format="{level}|{message}", level="WARNING")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            assert operator_norm_sq(np.zeros((1, 1, 3, 3)), (4, 4)) == 0.0
    finally:
        logging.captureWarnings(False)
    assert sink.getvalue() == (
        "WARNING|[warnings] RuntimeWarning: operator_norm_sq: dictionary is identically zero.\n"
    )
