import logging

import numpy as np
import pytest

from lsmrac.exceptions import ContractViolationError
from lsmrac.utils import as_rows, set_verbose_debug, verbose_debug


@pytest.fixture
def lsmrac_log(caplog):
    logger = logging.getLogger("lsmrac")
    logger.addHandler(caplog.handler)
    try:
        with caplog.at_level(logging.DEBUG, logger="lsmrac"):
            yield caplog
    finally:
        logger.removeHandler(caplog.handler)
        set_verbose_debug(False)


def test_verbose_debug_formats_and_truncates(lsmrac_log):
    set_verbose_debug(False)
    verbose_debug("robot %d suspended at step %d", 2, 40)
    verbose_debug("x" * 150)
    messages = [record.getMessage() for record in lsmrac_log.records]
    assert messages[0] == "robot 2 suspended at step 40"
    assert messages[1] == "x" * 100 + "..."

    set_verbose_debug(True)
    verbose_debug("y" * 150)
    assert lsmrac_log.records[-1].getMessage() == "y" * 150


def test_verbose_debug_is_silent_above_debug(caplog):
    logger = logging.getLogger("lsmrac")
    logger.addHandler(caplog.handler)
    try:
        with caplog.at_level(logging.INFO, logger="lsmrac"):
            verbose_debug("step %d", 1)
    finally:
        logger.removeHandler(caplog.handler)
    assert not caplog.records


def test_as_rows_accepts_stacks_and_columns():
    assert as_rows([[1.0], [2.0]], 2, "u").shape == (2,)
    assert as_rows(np.zeros((3, 2)), 2, "u").shape == (3, 2)
    assert as_rows(5.0, 1, "u").shape == (1,)
    with pytest.raises(ContractViolationError):
        as_rows(np.zeros((3, 4)), 2, "u")
