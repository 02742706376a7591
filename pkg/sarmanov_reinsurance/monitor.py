import sys
import logging

LOGGER_NAME = 'sarmanov-reinsurance'
LOG_FORMAT = '%(asctime)s:%(levelname)s:sarmanov-reinsurance:%(message)s'

class PyLogger(logging.Logger):
    """Wrapper for logging.Logger to redirect its message to
    file or sys.stderr accordingly. stdout is reserved for CSV output."""

    def __init__(self, *args, **kwargs):
        super(PyLogger, self).__init__(LOGGER_NAME, *args)
        self.propagate = False
        self.setup(kwargs.get('args') or {})

    def setup(self, sysargs):
        for handler in list(self.handlers):
          self.removeHandler(handler)
          if isinstance(handler, logging.FileHandler):
            handler.close()

        loglevel = logging.WARNING
        formatter = logging.Formatter(fmt=LOG_FORMAT)
        streamoutput = True

        if sysargs.get('verbose'):
          loglevel = logging.INFO

        if sysargs.get('debug'):
          loglevel = logging.DEBUG

        self.setLevel(loglevel)

        if sysargs.get('output'):
          fh = logging.FileHandler(sysargs['output'])
          fh.setLevel(loglevel)
          fh.setFormatter(formatter)
          self.addHandler(fh)
          streamoutput = False

        # Always use stderr for critical
        error = logging.StreamHandler(stream=sys.stderr)
        error.setLevel(logging.CRITICAL)
        error.setFormatter(formatter)
        self.addHandler(error)

        if streamoutput == True:
          out = logging.StreamHandler(stream=sys.stderr)
          out.setFormatter(formatter)
          out.setLevel(loglevel)
          # critical already goes through the handler above
          out.addFilter(lambda record: record.levelno < logging.CRITICAL)
          self.addHandler(out)

_logger = None

def getLogger():
  """
  getLogger returns the shared package logger. Nothing is parsed from the
  command line here, configure() applies cli flags once they are known.
  """
  global _logger
  if _logger is None:
    _logger = PyLogger()
  return _logger

def configure(args):
  """
  configure applies verbosity and output flags to the shared logger

  :param args: argparse Namespace from argprocess.getArgs
  """
  sysargs = {}
  if getattr(args, 'debug', False):
    sysargs['debug'] = args.debug
  if getattr(args, 'verbose', False):
    sysargs['verbose'] = args.verbose
  if getattr(args, 'output', None):
    sysargs['output'] = args.output

  logger = getLogger()
  logger.setup(sysargs)
  return logger
