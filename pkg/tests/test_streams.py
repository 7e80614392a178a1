import logging

import numpy as np
import pytest
from numpy.testing import assert_array_equal
from rich.logging import RichHandler

from hcb import streams
from hcb.log import configure_logging


def test_stream_is_reproducible():
    a = streams.stream(7, 2, 5, "env").random(8)
    b = streams.stream(7, 2, 5, "env").random(8)
    assert_array_equal(a, b)


def test_streams_are_distinct():
    first = streams.stream(7, 0, 0, "env").random(4)
    assert not np.array_equal(first, streams.stream(7, 0, 0, "policy").random(4))
    assert not np.array_equal(first, streams.stream(7, 0, 1, "env").random(4))
    assert not np.array_equal(first, streams.stream(8, 0, 0, "env").random(4))
    keys = {streams.stream_key(7, t, r, p) for t in range(3) for r in range(100) for p in ("env", "policy")}
    assert len(keys) == 600


def test_stream_rejects_bad_coordinates():
    with pytest.raises(ValueError):
        streams.stream(7, purpose="telemetry")
    with pytest.raises(ValueError):
        streams.stream(-1)


def test_configure_logging(monkeypatch):
    monkeypatch.setenv("HCB_LOG", "debug")
    assert configure_logging() == logging.DEBUG
    assert configure_logging("info") == logging.INFO
    logger = logging.getLogger("hcb")
    assert sum(isinstance(h, RichHandler) for h in logger.handlers) == 1
    monkeypatch.setenv("HCB_LOG", "chatty")
    assert configure_logging() == logging.WARNING
