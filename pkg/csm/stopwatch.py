"""
    Simple elapsed-time helper for pipeline runs
"""
import time


class Stopwatch(object):
    """
        Wall-clock stopwatch in seconds.
    """

    def __init__(self):
        """
            Start counting instantly
        """
        self.start_time = time.monotonic()

    def elapsed(self):
        """
            Seconds since the stopwatch started
        """
        return time.monotonic() - self.start_time
