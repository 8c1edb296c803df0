'''
based on
https://github.com/exoscale/python-logstash-formatter
'''
import socket
import logging
import datetime
import json


def _default_json_default(obj):
    """Coerce everything else to strings."""
    return str(obj)


# Attributes every LogRecord carries; anything else came in through `extra`
_RECORD_ATTRS = frozenset(vars(logging.makeLogRecord({})).keys()) | {'message', 'asctime'}


class LogstashFormatter(logging.Formatter):

    """
    A logging formatter emitting one logstash-style JSON document per record.
    """

    def __init__(self, defaults=None, source_host=None, json_default=_default_json_default):
        """
        :param defaults:     extra fields available in all logs
        :param source_host:  the source host
        :param json_default: Default JSON representation for unknown types,
                             by default coerce everything to a string
        """
        super(LogstashFormatter, self).__init__()
        self.defaults = dict(defaults or {})
        self.source_host = source_host
        self.json_default = json_default
        if not source_host:
            try:
                self.source_host = socket.gethostname()
            except socket.error:
                self.source_host = ""

    def format(self, record):
        """
        Format a log record to JSON
        """
        fields = dict((k, v) for k, v in vars(record).items() if k not in _RECORD_ATTRS)
        ts = datetime.datetime.fromtimestamp(record.created, datetime.timezone.utc).strftime('%Y-%m-%dT%H:%M:%S.%fZ')

        logr = {'@timestamp': ts,
                '@fields': self._build_fields(fields),
                'host': self.source_host,
                'level': record.levelname,
                'logger': record.name,
                'message': record.getMessage()}
        if record.exc_info:
            logr['exception'] = self.formatException(record.exc_info)

        return json.dumps(logr, default=self.json_default, sort_keys=True)

    def _build_fields(self, fields):
        """
        Return provided fields including any in defaults
        """
        merged = dict(self.defaults)
        merged.update(fields)
        return merged
