"""
Process-level plumbing shared by the pipeline commands: logging setup,
progress bars and the thread pool wrapper.
"""
import sys
import time
import logging
import concurrent.futures as futures
from progressbar import ProgressBar, Percentage, Bar, Timer, ETA
from logutils.logstash_formatter import LogstashFormatter

logger = logging.getLogger(__name__)

widgets = ['Progress: ', Percentage(), '   ', Timer(), ' ', Bar(marker='#', left='[', right=']'), ' ', ETA()]

# Progress bars are only drawn for interactive runs
show_progress = False


def set_logging(debug=False, json_lines=False):
    global show_progress
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)

    if debug:
        logging.basicConfig(
            level=logging.DEBUG,
            format="[%(asctime)s] %(levelname)s [%(name)s.%(funcName)s:%(lineno)d] %(message)s",
            datefmt="%H:%M:%S")
    else:
        logging.basicConfig(
            level=logging.INFO,
            format="%(message)s",
            datefmt="%H:%M:%S")

    if json_lines:
        for handler in root.handlers:
            handler.setFormatter(LogstashFormatter(defaults={'app': 'rdalloc'}))

    show_progress = sys.stderr.isatty() and not json_lines


def run_parallel(fn, items, max_workers=4, label=None):
    """
    Apply `fn` to every item on a thread pool and return the results in the
    order of `items`, whatever order the workers finish in.
    """
    items = list(items)
    if not items:
        return []
    start = time.time()
    results = [None] * len(items)
    progress = None
    if show_progress and label:
        progress = ProgressBar(widgets=widgets, max_value=len(items)).start()

    completed = 0
    with futures.ThreadPoolExecutor(max_workers=max_workers) as executor:
        future_index = dict((executor.submit(fn, item), i) for i, item in enumerate(items))
        for future in futures.as_completed(future_index):
            i = future_index[future]
            if future.exception() is not None:
                logger.error('%s: item %d generated an exception: %r', label or fn.__name__, i, future.exception())
                raise future.exception()
            results[i] = future.result()
            completed += 1
            if progress:
                progress.update(completed)

    if progress:
        progress.finish()
    if label:
        logger.debug("%s duration: %.2fs", label, time.time() - start)
    return results
