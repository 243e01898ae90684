import time
import uuid
import logging
import humanfriendly

from threading import Thread, Event


class WorkType:
    SAMPLE = 'Sample Set'
    CERTIFY = 'Certify Hull'
    VALIDATE = 'Validate Cut'

    ALL = (SAMPLE, CERTIFY, VALIDATE)


class Worker:
    def __init__(self):
        self._executor_thread = None
        self._results = None
        self._errors = None
        self._worker_manager = None

    def run(self, work_type, target, indexed_tasks):
        self._results = []
        self._errors = []
        self._executor_thread = Thread(name=self.get_executor_thread_name(), target=self._run,
                                       args=(work_type, target, indexed_tasks))
        self._executor_thread.start()

    def execute(self, target, task):
        raise NotImplementedError

    def wait(self):
        return self._executor_thread.join() if self._executor_thread else None

    def get_results(self):
        return self._results

    def get_errors(self):
        return self._errors

    def _run(self, work_type, target, indexed_tasks):
        total = len(indexed_tasks)
        for i, (index, task) in enumerate(indexed_tasks, 1):
            logging.debug(f'Task {work_type} ({i}/{total}): Starting...')
            try:
                self._results.append((index, self.execute(target, task)))
            except Exception as e:
                logging.error(f'Task {work_type} ({i}/{total}): Failed with {e!r}')
                self._errors.append((index, e))
                return
            logging.debug(f'Task {work_type} ({i}/{total}): Finished!')

    def get_executor_thread_name(self):
        id_ = uuid.uuid4()
        id_ = str(id_).split('-', 1)[0]
        return f'{self.__class__.__name__}-{id_}'


class ThreadWorker(Worker):
    def execute(self, target, task):
        return target(*task)


class WorkerManager:
    """Spread independent tasks over workers and gather results by task index

    Aggregation never depends on the number of workers or on thread timing,
    so seeded computations stay reproducible.
    """

    def __init__(self):
        self._workers = []
        self._waiter_thread = None
        self._finished_event = Event()

    def map(self, work_type, target, tasks):
        """Run target(*task) for every task

        Args:
            work_type ([str]): One of WorkType.ALL, used for logging
            target ([callable]): Function executed per task
            tasks ([list]): Argument tuples

        Returns:
            [list]: Results ordered as tasks
        """
        if work_type not in WorkType.ALL:
            raise TypeError('expecting WorkType value')
        tasks = list(tasks)
        if not self._workers:
            raise RuntimeError('no workers registered')

        started = time.perf_counter()
        self._finished_event.clear()
        shares = WorkerManager.divide_iterations(len(tasks), len(self._workers))
        indexed = list(enumerate(tasks))
        offset = 0
        for worker, share in zip(self._workers, shares):
            worker.run(work_type, target, indexed[offset:offset + share])
            offset += share
        self._waiter_thread = Thread(target=self._wait_workers)
        self._waiter_thread.start()
        self._finished_event.wait()

        errors = sorted(self.get_errors(), key=lambda item: item[0])
        if errors:
            index, error = errors[0]
            logging.error(f'{work_type}: task {index} failed, {len(errors)} worker(s) stopped early')
            raise error

        results = sorted(self.get_results(), key=lambda item: item[0])
        elapsed = humanfriendly.format_timespan(time.perf_counter() - started)
        logging.info(f'{work_type}: {len(tasks)} tasks on {len(self._workers)} workers in {elapsed}')
        return [result for _, result in results]

    def get_results(self):
        results = []
        for worker in self._workers:
            results.extend(worker.get_results() or [])
        return results

    def get_errors(self):
        errors = []
        for worker in self._workers:
            errors.extend(worker.get_errors() or [])
        return errors

    def add_worker(self, worker):
        if not isinstance(worker, Worker):
            raise TypeError('expecting Worker object')
        worker._worker_manager = self
        self._workers.append(worker)

    def total_workers(self):
        return len(self._workers)

    def _wait_workers(self):
        for worker in self._workers:
            worker.wait()
        self._finished_event.set()

    @staticmethod
    def divide_iterations(total_iterations, total_workers):
        """Contiguous share of tasks per worker, sizes differing by at most one"""
        worker_total_iterations = [0] * total_workers
        for i in range(total_iterations):
            worker_total_iterations[i % total_workers] += 1
        return worker_total_iterations

    @staticmethod
    def with_threads(total_workers):
        manager = WorkerManager()
        for _ in range(total_workers):
            manager.add_worker(ThreadWorker())
        return manager


def run_tasks(manager, work_type, target, tasks):
    """Run tasks through the manager, or sequentially without one"""
    if manager is None or manager.total_workers() <= 1:
        return [target(*task) for task in tasks]
    return manager.map(work_type, target, tasks)
