"""
Describes the events the pipeline logs

Every event is registered here with the key/values it carries, so a log
consumer can rely on the names. `log_event` refuses names that are not
in the catalogue.
"""
import logging

logger = logging.getLogger('rdalloc.events')

count = 'int'
real = 'float'
seconds = 'float, wall-clock duration'
path = 'filesystem path'


class Event(object):

    """
    Base Event class which describes events, their names and expected information
        keeps track of all instances
        inherit to set repeating key/value information requirements
    """
    events = {}
    defaults = dict()

    def __init__(self, name, **kargs):
        self.name = name
        kargs.update(self.defaults)
        self.kargs = kargs
        self.events[name] = self


class CommandEvent(Event):
    defaults = dict(command='subcommand name')


##########################################################
# Pipeline commands
##########################################################

CommandEvent('cli.started', seed=count)
CommandEvent('cli.done', duration=seconds)
CommandEvent('cli.failed', error='message')
CommandEvent('cli.wrote', path=path)

##########################################################
# Modules
##########################################################

Event('ingest.rd_samples', chunks=count, grid_size=count)
Event('ingest.features', chunks=count, dims=count)
Event('cluster.kmeans.restart', restart=count, inertia=real, iterations=count)
Event('cluster.kmeans.done', k=count, inertia=real)
Event('cluster.kmeans.reseed', cluster=count)
Event('cluster.sweep.point', k=count, error=real)
Event('classifier.cv.cell', c=real, gamma=real, accuracy=real)
Event('classifier.cv.best', c=real, gamma=real, accuracy=real)
Event('classifier.smo.not_converged', passes=count, violation=real)
Event('classifier.evaluated', accuracy=real, test_count=count)
Event('allocation.slack', avg_rate=real)
Event('allocation.solved', avg_rate=real, avg_quality=real, worst_quality=real, lambda_star=real, iterations=count)
Event('allocation.exhaustive', combinations=count, avg_rate=real)
Event('evaluation.bd_rate', pair='name', bd_rate=real)
Event('synth.generated', chunks=count, k_true=count)


def log_event(name, event, show=True, **kwargs):
    """
    Log `<name>.<event>` with its key/values; `show=False` logs at debug level.
    """
    full = '%s.%s' % (name, event)
    assert full in Event.events, 'unknown event %s' % full
    text = ' '.join('%s=%s' % (k, _fmt(v)) for k, v in sorted(kwargs.items()))
    level = logging.INFO if show else logging.DEBUG
    logger.log(level, '%s %s', full, text, extra=dict(event=full, **kwargs))


def _fmt(v):
    if isinstance(v, float):
        return '%.6g' % v
    return v
