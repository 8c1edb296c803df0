import json
import logging
import pytest
import numpy as np
from rdalloc import tasks
from logutils.events import Event, log_event
from logutils.logstash_formatter import LogstashFormatter

def record(msg='hello %s', args=('world',), **extra):
    rec = logging.LogRecord('rdalloc.test', logging.INFO, __file__, 1, msg, args, None)
    rec.__dict__.update(extra)
    return rec

def test_logstash_formatter_emits_one_json_document():
    formatter = LogstashFormatter(defaults={'app': 'rdalloc'}, source_host='box')
    doc = json.loads(formatter.format(record(event='cli.done', duration=1.5)))
    assert doc['message'] == 'hello world'
    assert doc['host'] == 'box'
    assert doc['level'] == 'INFO'
    assert doc['logger'] == 'rdalloc.test'
    assert doc['@fields'] == {'app': 'rdalloc', 'event': 'cli.done', 'duration': 1.5}
    assert doc['@timestamp'].endswith('Z')

def test_logstash_formatter_coerces_unknown_types():
    formatter = LogstashFormatter(source_host='box')
    doc = json.loads(formatter.format(record(shape=np.zeros(2).shape, value=object)))
    assert doc['@fields']['shape'] == [2]
    assert isinstance(doc['@fields']['value'], str)

def test_log_event_carries_fields(caplog):
    with caplog.at_level(logging.DEBUG, logger='rdalloc.events'):
        log_event('cluster', 'kmeans.done', k=3, inertia=1.25)
        log_event('cluster', 'kmeans.reseed', show=False, cluster=2)
    done, reseed = caplog.records[-2:]
    assert done.levelno == logging.INFO
    assert done.event == 'cluster.kmeans.done'
    assert done.k == 3
    assert 'inertia=1.25' in done.getMessage()
    assert reseed.levelno == logging.DEBUG

def test_unknown_event_is_rejected():
    with pytest.raises(AssertionError):
        log_event('cluster', 'nonexistent')

def test_command_events_carry_the_command():
    assert 'command' in Event.events['cli.started'].kargs
    assert 'path' in Event.events['cli.wrote'].kargs

def test_run_parallel_keeps_input_order():
    def slow_square(x):
        import time
        time.sleep(0.01 * (5 - x))
        return x * x
    assert tasks.run_parallel(slow_square, range(5), max_workers=5, label='squares') == [0, 1, 4, 9, 16]
    assert tasks.run_parallel(slow_square, [], max_workers=2) == []

def test_run_parallel_reraises():
    def boom(x):
        if x == 2:
            raise ValueError('bad item')
        return x
    with pytest.raises(ValueError):
        tasks.run_parallel(boom, range(4), max_workers=2)

def test_set_logging_json(capsys):
    root = logging.getLogger()
    saved = list(root.handlers), root.level
    try:
        tasks.set_logging(json_lines=True)
        assert not tasks.show_progress
        log_event('synth', 'generated', chunks=3, k_true=1)
        line = capsys.readouterr().err.strip().splitlines()[-1]
        doc = json.loads(line)
        assert doc['@fields']['event'] == 'synth.generated'
        assert doc['@fields']['app'] == 'rdalloc'
    finally:
        for handler in list(root.handlers):
            root.removeHandler(handler)
        for handler in saved[0]:
            root.addHandler(handler)
        root.setLevel(saved[1])
