"""
参数检查点 - 扁平二进制容器

格式（全部小端序）:
    magic  b"SRCK" | version u16 | count u32
    每条记录: name_len u16 | name (utf-8) | dtype u8 | ndim u8 | dims u32 * ndim | raw values
"""
import struct
from pathlib import Path
from typing import BinaryIO, Dict, Union

import numpy as np

from core.errors import ParseError
from core.logger import logger

MAGIC = b"SRCK"
VERSION = 1

_DTYPE_CODES = {
    np.dtype("<f4"): 1,
    np.dtype("<f8"): 2,
    np.dtype("<i8"): 3,
}
_CODE_DTYPES = {code: dtype for dtype, code in _DTYPE_CODES.items()}


def save_tensors(path: Union[str, Path], arrays: Dict[str, np.ndarray]) -> Path:
    """
    按插入顺序写出命名数组，读回时逐位一致

    Args:
        path: 输出文件路径
        arrays: 名称 -> 数组（float32 / float64 / int64）

    Returns:
        Path: 写出的文件路径
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<HI", VERSION, len(arrays)))
        for name, array in arrays.items():
            _write_record(f, name, np.asarray(array))
    logger.debug(f"Saved {len(arrays)} tensors to {path}")
    return path


def _write_record(f: BinaryIO, name: str, array: np.ndarray) -> None:
    dtype = array.dtype.newbyteorder("<")
    if dtype not in _DTYPE_CODES:
        raise ValueError(f"unsupported dtype {array.dtype} for tensor {name}")
    encoded = name.encode("utf-8")
    f.write(struct.pack("<H", len(encoded)))
    f.write(encoded)
    f.write(struct.pack("<BB", _DTYPE_CODES[dtype], array.ndim))
    if array.ndim:
        f.write(struct.pack(f"<{array.ndim}I", *array.shape))
    f.write(np.ascontiguousarray(array, dtype=dtype).tobytes())


def load_tensors(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    """
    读取 save_tensors 写出的容器

    Raises:
        ParseError: 文件头或记录损坏
    """
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 10 or data[:4] != MAGIC:
        raise ParseError(f"{path} is not a tensor checkpoint")
    version, count = struct.unpack_from("<HI", data, 4)
    if version != VERSION:
        raise ParseError(f"unsupported checkpoint version {version} in {path}")

    offset = 10
    arrays: Dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", data, offset)
            offset += 2
            name = data[offset:offset + name_len].decode("utf-8")
            offset += name_len
            code, ndim = struct.unpack_from("<BB", data, offset)
            offset += 2
            shape = struct.unpack_from(f"<{ndim}I", data, offset) if ndim else ()
            offset += 4 * ndim
            dtype = _CODE_DTYPES[code]
            size = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
            if offset + size > len(data):
                raise ParseError(f"truncated record {name!r} in {path}")
            arrays[name] = np.frombuffer(data, dtype=dtype, count=size // dtype.itemsize, offset=offset).reshape(shape).copy()
            offset += size
    except (struct.error, KeyError) as e:
        raise ParseError(f"corrupt checkpoint {path}: {e}") from e

    logger.debug(f"Loaded {len(arrays)} tensors from {path}")
    return arrays
