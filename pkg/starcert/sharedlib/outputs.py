# Filename    : outputs.py
# Description : Atomic, lock-protected writers for multi-file command outputs

import fcntl
import json
import logging
import os
import shutil
from pathlib import Path

logger = logging.getLogger(__name__)


def write_bytes_atomic(filepath, payload):
    """
    Write bytes with an exclusive lock using an atomic rename

    Args:
        filepath: Destination path
        payload: Bytes to write
    """
    filepath = Path(filepath)
    # Write to temporary file first, then atomically rename
    temp_file = filepath.with_name(filepath.name + '.tmp')

    try:
        with open(temp_file, 'wb') as f:
            fcntl.flock(f.fileno(), fcntl.LOCK_EX)
            try:
                f.write(payload)
                f.flush()
                os.fsync(f.fileno())
            finally:
                fcntl.flock(f.fileno(), fcntl.LOCK_UN)

        temp_file.replace(filepath)

    except Exception:
        if temp_file.exists():
            try:
                temp_file.unlink()
            except Exception:
                pass
        raise


def write_text_atomic(filepath, text):
    write_bytes_atomic(filepath, text.encode('utf-8'))


def write_json_atomic(filepath, data):
    write_text_atomic(filepath, json.dumps(data, indent=2) + '\n')


def read_json_locked(filepath):
    """
    Read a JSON file under a shared lock

    Raises:
        FileNotFoundError, json.JSONDecodeError, UnicodeDecodeError
    """
    with open(filepath, 'r', encoding='utf-8') as f:
        # multiple readers allowed
        fcntl.flock(f.fileno(), fcntl.LOCK_SH)
        try:
            return json.load(f)
        finally:
            fcntl.flock(f.fileno(), fcntl.LOCK_UN)


class OutputSession:
    """Records every file one command writes and removes them all if the command fails"""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.written = []
        self.created_dir = False
        self.stats = {
            'files': 0,
            'bytes': 0
        }

    def __enter__(self):
        if not self.out_dir.exists():
            self.out_dir.mkdir(parents=True)
            self.created_dir = True
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            logger.info(f"Wrote {self.stats['files']} file(s), {self.stats['bytes']} bytes under {self.out_dir}")
            return False
        self.rollback()
        return False

    def path(self, name):
        name = Path(name)
        return name if name.is_absolute() else self.out_dir / name

    def write_bytes(self, name, payload):
        target = self.path(name)
        target.parent.mkdir(parents=True, exist_ok=True)
        write_bytes_atomic(target, payload)
        self.written.append(target)
        self.stats['files'] += 1
        self.stats['bytes'] += len(payload)
        logger.debug(f"Output WRITE: {target} ({len(payload)} bytes)")
        return target

    def write_text(self, name, text):
        return self.write_bytes(name, text.encode('utf-8'))

    def write_json(self, name, data):
        return self.write_text(name, json.dumps(data, indent=2) + '\n')

    def rollback(self):
        """Delete everything written so far (and the output directory if this session made it)"""
        count = 0
        for filepath in reversed(self.written):
            try:
                filepath.unlink()
                count += 1
            except FileNotFoundError:
                pass
            except Exception as e:
                logger.warning(f"Failed to delete partial output {filepath}: {str(e)}")
        if self.created_dir:
            shutil.rmtree(self.out_dir, ignore_errors=True)
        logger.info(f"Output ROLLBACK: {count} partial file(s) removed from {self.out_dir}")
        self.written = []
        return count
