import pytest

from services.system_logger import SystemLogCollector


@pytest.fixture
def collector():
    return SystemLogCollector(max_logs=3)


def test_newest_first_and_bounded(collector):
    for best in range(5):
        collector.log_query("im2im", best, 10, 1000)
    logs = collector.get_logs()
    assert [log["details"]["best"] for log in logs] == [4, 3, 2]


def test_filters(collector):
    collector.log_clustering("db", 100, 10, "fixed_rate", 0.8, 4)
    collector.log_skip("distance", "no geotags")
    assert [log["category"] for log in collector.get_logs(level="WARNING")] == ["benchmark"]
    assert len(collector.get_logs(category="clustering")) == 1
    assert collector.counts() == {"clustering": 1, "benchmark": 1, "query": 0, "system_error": 0}


def test_unknown_category_is_rejected(collector):
    with pytest.raises(ValueError):
        collector.add_log("INFO", "price_update", "nope")


def test_listeners(collector):
    seen = []
    collector.add_listener(seen.append)
    collector.log_error("GeotagError", "missing geotags")
    collector.remove_listener(seen.append)
    collector.log_error("GeotagError", "again")
    assert len(seen) == 1
    assert seen[0]["category"] == "system_error"


def test_failing_listener_does_not_block(collector):
    def broken(entry):
        raise RuntimeError("listener down")

    collector.add_listener(broken)
    collector.log_query("seq2seq", 1, 3, 5)
    assert len(collector.get_logs()) == 1
