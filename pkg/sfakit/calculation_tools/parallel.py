"""
Worker pool handed to the computational modules by the orchestrator
"""
# Standard library imports
from concurrent.futures import ThreadPoolExecutor
import logging

logger = logging.getLogger('WorkerPoolLogger')


class WorkerPool:
    """Order-preserving parallel map over a fixed number of threads

    With ``threads = 1`` every map runs serially in the calling thread, so
    results never depend on scheduling.

    :param int threads: Number of worker threads

    """
    def __init__(self, threads=1):

        if threads < 1:
            raise ValueError('threads must be at least 1')
        self.threads = int(threads)
        self._executor = None

    def __enter__(self):
        if self.threads > 1:
            self._executor = ThreadPoolExecutor(max_workers=self.threads)
        return self

    def __exit__(self, exc_type, exc_value, tb):
        self.close()

    def close(self):
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def map(self, func, items):
        """Applies ``func`` to every item and returns the results in input order

        :param callable func: The function
        :param iterable items: The inputs

        :return: The results
        :rtype: list

        """
        items = list(items)
        if self.threads == 1 or len(items) < 2:
            return [func(item) for item in items]
        if self._executor is None:
            with ThreadPoolExecutor(max_workers=self.threads) as executor:
                return list(executor.map(func, items))
        logger.debug(f'Mapping {len(items)} items over {self.threads} threads')
        return list(self._executor.map(func, items))


def serial_pool():
    """Default pool used when a caller does not supply one"""
    return WorkerPool(1)
