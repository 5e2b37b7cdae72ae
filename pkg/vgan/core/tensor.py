"""
Tensor and Tape

Dense float tensors over numpy buffers and the reverse-mode tape that records
the operations applied to them. Backward rules are written with tensor ops,
so a backward pass run with create_graph=True is itself recorded on the tape
and can be differentiated again.
"""

import itertools
import threading
from contextlib import contextmanager
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ShapeError


_uid_counter = itertools.count()
_state = threading.local()


def _tape_stack() -> List["Tape"]:
    stack = getattr(_state, "tapes", None)
    if stack is None:
        stack = []
        _state.tapes = stack
    return stack


def current_tape() -> Optional["Tape"]:
    """Innermost active tape of this thread, if any"""
    stack = _tape_stack()
    return stack[-1] if stack else None


def is_grad_enabled() -> bool:
    """Whether ops are currently recorded"""
    return getattr(_state, "grad_enabled", True)


@contextmanager
def no_grad():
    """Disable recording inside the block"""
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


@contextmanager
def enable_grad():
    """Re-enable recording inside the block"""
    previous = is_grad_enabled()
    _state.grad_enabled = True
    try:
        yield
    finally:
        _state.grad_enabled = previous


class Tensor:
    """N-dimensional float32/float64 array with an optional gradient slot"""

    def __init__(self, data, requires_grad: bool = False):
        array = np.asarray(data)
        if array.dtype != np.float32 and array.dtype != np.float64:
            array = array.astype(np.float32)
        if any(extent <= 0 for extent in array.shape):
            raise ShapeError(f"tensor extents must be positive, got {array.shape}")
        self.data: np.ndarray = array
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.uid = next(_uid_counter)
        self._node: Optional["Node"] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def strides(self) -> Tuple[int, ...]:
        """Element (not byte) offsets per axis"""
        return tuple(stride // self.data.itemsize for stride in self.data.strides)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    def is_contiguous(self) -> bool:
        return bool(self.data.flags["C_CONTIGUOUS"])

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        """Same buffer, cut from the graph"""
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def view(self, *shape) -> "Tensor":
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def __add__(self, other):
        from . import ops
        if isinstance(other, Tensor):
            return ops.add(self, other)
        return ops.add_scalar(self, float(other))

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        if isinstance(other, Tensor):
            return ops.sub(self, other)
        return ops.add_scalar(self, -float(other))

    def __mul__(self, other):
        from . import ops
        if isinstance(other, Tensor):
            return ops.mul(self, other)
        return ops.scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops
        return ops.scale(self, -1.0)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"


class Node:
    """One recorded operation: inputs, output and the function holding its backward rule"""

    def __init__(self, function: "Function", inputs: Sequence[Tensor], output: Tensor, tape: "Tape"):
        self.function = function
        self.inputs = tuple(inputs)
        self.output = output
        self.tape = tape
        self.index = -1

    @property
    def input_ids(self) -> Tuple[int, ...]:
        return tuple(tensor.uid for tensor in self.inputs)

    @property
    def output_id(self) -> int:
        return self.output.uid


class Tape:
    """Ordered record of operations; one training step owns one tape"""

    def __init__(self):
        self.nodes: List[Node] = []

    def record(self, node: Node):
        node.index = len(self.nodes)
        self.nodes.append(node)

    def leaves(self) -> List[Tensor]:
        """Leaf tensors requiring grad, in first-use order"""
        seen = set()
        leaves = []
        for node in self.nodes:
            for tensor in node.inputs:
                if tensor.requires_grad and tensor.is_leaf and tensor.uid not in seen:
                    seen.add(tensor.uid)
                    leaves.append(tensor)
        return leaves

    def __len__(self) -> int:
        return len(self.nodes)

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()
        return False


class Function:
    """A differentiable primitive: numpy forward, tensor-op backward"""

    name = "function"

    def __init__(self, **params):
        self.params = params
        self.inputs: Tuple[Tensor, ...] = ()
        self.output: Optional[Tensor] = None
        self.needs_input_grad: Tuple[bool, ...] = ()

    def forward(self, *arrays: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: Tensor) -> Tuple[Optional[Tensor], ...]:
        raise NotImplementedError

    @classmethod
    def apply(cls, *inputs: Tensor, **params) -> Tensor:
        function = cls(**params)
        output = Tensor(function.forward(*[tensor.data for tensor in inputs]))
        tape = current_tape()
        if tape is not None and is_grad_enabled() and any(tensor.requires_grad for tensor in inputs):
            function.inputs = tuple(inputs)
            function.output = output
            function.needs_input_grad = tuple(tensor.requires_grad for tensor in inputs)
            output.requires_grad = True
            node = Node(function, inputs, output, tape)
            output._node = node
            tape.record(node)
        return output


def _run_backward(root: Tensor, seed: Tensor, create_graph: bool) -> Dict[int, Tensor]:
    """Walk the root's tape backwards from the root's node, in tape order"""
    from . import ops

    grads: Dict[int, Tensor] = {root.uid: seed}
    node = root._node
    if node is None:
        return grads

    tape = node.tape
    mode = enable_grad() if create_graph else no_grad()
    with mode:
        for index in range(node.index, -1, -1):
            current = tape.nodes[index]
            grad_out = grads.get(current.output.uid)
            if grad_out is None:
                continue
            input_grads = current.function.backward(grad_out)
            for tensor, grad_in in zip(current.inputs, input_grads):
                if grad_in is None or not tensor.requires_grad:
                    continue
                if grad_in.shape != tensor.shape:
                    raise ShapeError(
                        f"{current.function.name} backward produced {grad_in.shape} for input {tensor.shape}")
                previous = grads.get(tensor.uid)
                grads[tensor.uid] = grad_in if previous is None else ops.add(previous, grad_in)
    return grads


def _scalar_seed(loss: Tensor) -> Tensor:
    if loss.size != 1:
        raise ShapeError(f"backward needs a single-element loss, got shape {loss.shape}")
    return Tensor(np.ones_like(loss.data))


def backward(loss: Tensor, tape: Optional[Tape] = None,
             inputs: Optional[Sequence[Tensor]] = None) -> Dict[int, np.ndarray]:
    """Populate .grad (accumulating) on leaves and return {uid: gradient}

    Leaves are the given inputs, otherwise every requires_grad leaf recorded on
    the tape. Leaves the loss does not reach get zero gradients.
    """
    seed = _scalar_seed(loss)
    grads = _run_backward(loss, seed, create_graph=False)

    if inputs is None:
        if tape is None:
            tape = loss._node.tape if loss._node is not None else current_tape()
        leaves = tape.leaves() if tape is not None else []
        if loss.requires_grad and loss.is_leaf and all(leaf.uid != loss.uid for leaf in leaves):
            leaves.append(loss)
    else:
        leaves = list(inputs)

    gradient_map: Dict[int, np.ndarray] = {}
    for leaf in leaves:
        found = grads.get(leaf.uid)
        value = np.array(found.data, copy=True) if found is not None else np.zeros_like(leaf.data)
        leaf.grad = value if leaf.grad is None else leaf.grad + value
        gradient_map[leaf.uid] = value
    return gradient_map


def grad(output: Tensor, inputs: Sequence[Tensor], create_graph: bool = False) -> List[Tensor]:
    """Gradients of a scalar output w.r.t. inputs, leaving .grad untouched"""
    seed = _scalar_seed(output)
    grads = _run_backward(output, seed, create_graph=create_graph)
    results = []
    for tensor in inputs:
        found = grads.get(tensor.uid)
        results.append(found if found is not None else Tensor(np.zeros_like(tensor.data)))
    return results
