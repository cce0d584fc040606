"""Atomic memory operations usable from nopython code.

numba exposes atomics only for CUDA, so these emit the LLVM instructions
directly. All operate on element ``idx`` of a 1-d contiguous array.
"""
from llvmlite import ir
from numba import types
from numba.core import cgutils
from numba.extending import intrinsic

sched_yield = types.ExternalFunction("sched_yield", types.int32())


def _item_pointer(context, builder, arrty, arr, idx):
    ary = context.make_array(arrty)(context, builder, arr)
    return cgutils.get_item_pointer(context, builder, arrty, ary, [idx], wraparound=False)


@intrinsic
def atomic_add_f64(typingctx, arr, idx, val):
    """``arr[idx] += val`` as one indivisible read-modify-write."""
    sig = types.void(arr, idx, val)

    def codegen(context, builder, signature, args):
        ptr = _item_pointer(context, builder, signature.args[0], args[0], args[1])
        builder.atomic_rmw("fadd", ptr, args[2], "monotonic")
        return context.get_dummy_value()

    return sig, codegen


@intrinsic
def try_acquire(typingctx, arr, idx):
    """Compare-and-swap ``arr[idx]`` from 0 to 1 with acquire ordering."""
    sig = types.boolean(arr, idx)

    def codegen(context, builder, signature, args):
        ptr = _item_pointer(context, builder, signature.args[0], args[0], args[1])
        lty = context.get_value_type(signature.args[0].dtype)
        res = builder.cmpxchg(ptr, ir.Constant(lty, 0), ir.Constant(lty, 1), "acquire", "monotonic")
        return builder.extract_value(res, 1)

    return sig, codegen


@intrinsic
def release(typingctx, arr, idx):
    """Store 0 into ``arr[idx]`` with release ordering."""
    sig = types.void(arr, idx)

    def codegen(context, builder, signature, args):
        ptr = _item_pointer(context, builder, signature.args[0], args[0], args[1])
        lty = context.get_value_type(signature.args[0].dtype)
        builder.store_atomic(ir.Constant(lty, 0), ptr, "release", signature.args[0].dtype.bitwidth // 8)
        return context.get_dummy_value()

    return sig, codegen


@intrinsic
def fetch_add_i64(typingctx, arr, idx, val):
    """Atomically add ``val`` to ``arr[idx]`` and return the previous value."""
    sig = arr.dtype(arr, idx, val)

    def codegen(context, builder, signature, args):
        ptr = _item_pointer(context, builder, signature.args[0], args[0], args[1])
        return builder.atomic_rmw("add", ptr, args[2], "acq_rel")

    return sig, codegen


@intrinsic
def load_acquire(typingctx, arr, idx):
    sig = arr.dtype(arr, idx)

    def codegen(context, builder, signature, args):
        arrty = signature.args[0]
        ptr = _item_pointer(context, builder, arrty, args[0], args[1])
        return builder.load_atomic(ptr, "acquire", arrty.dtype.bitwidth // 8)

    return sig, codegen


@intrinsic
def store_release(typingctx, arr, idx, val):
    sig = types.void(arr, idx, val)

    def codegen(context, builder, signature, args):
        arrty = signature.args[0]
        ptr = _item_pointer(context, builder, arrty, args[0], args[1])
        builder.store_atomic(args[2], ptr, "release", arrty.dtype.bitwidth // 8)
        return context.get_dummy_value()

    return sig, codegen
