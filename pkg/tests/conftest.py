import pytest

from acceldse import (
    AcceleratorConfig,
    Dataflow,
    OperatorDescriptor,
    ParamSpace,
    SubnetDescriptor,
)

# The 5x5/stride-1/7x7/552-channel reference operator and its 16x16-PE,
# 3x384KB accelerator (weight stationary, output-channel loop innermost),
# used across the suite as the canonical large workload.
REF_OP = OperatorDescriptor(
    kernel=5, stride=1, out_rows=7, in_channels=552, out_channels=552, act_bits=8, wgt_bits=8
)
REF_CFG = AcceleratorConfig(
    pe_x=16, pe_y=16, act_cache_kb=384, wgt_cache_kb=384, out_cache_kb=384,
    dataflow=Dataflow.WS, loop_order="BIHWO",
)


@pytest.fixture
def ref_op():
    return REF_OP


@pytest.fixture
def ref_cfg():
    return REF_CFG


def make_synthetic_subnet_22() -> SubnetDescriptor:
    """A mobile-CNN-scale 22-operator subnet with channel sizes up to 552."""
    rows = [56, 56, 28, 28, 28, 28, 14, 14, 14, 14, 14,
            14, 14, 14, 7, 7, 7, 7, 7, 7, 7, 7]
    chans = [16, 24, 24, 32, 32, 64, 64, 112, 112, 184, 184,
             256, 256, 352, 352, 416, 416, 480, 480, 512, 512, 552]
    ops = []
    prev_c = 16
    prev_rows = 56
    for i in range(22):
        kernel = 3 if i % 3 else 5
        stride = 2 if rows[i] != prev_rows else 1
        ops.append(
            OperatorDescriptor(
                kernel=kernel,
                stride=stride,
                out_rows=rows[i],
                in_channels=prev_c,
                out_channels=chans[i],
                act_bits=(8, 4, 2)[i % 3],
                wgt_bits=(8, 4, 2)[(i + 1) % 3],
            )
        )
        prev_c = chans[i]
        prev_rows = rows[i]
    return SubnetDescriptor(tuple(ops))


def make_small_subnet() -> SubnetDescriptor:
    """Three modest operators used by the search-quality experiments."""
    return SubnetDescriptor(
        (
            OperatorDescriptor(3, 1, 16, 64, 128, 8, 8),
            OperatorDescriptor(1, 1, 16, 128, 128, 4, 8),
            OperatorDescriptor(3, 2, 8, 128, 256, 8, 4),
        )
    )


def make_reduced_space_24() -> ParamSpace:
    return ParamSpace(
        pe_x=(8, 16),
        pe_y=(8, 16),
        act_cache_kb=(64,),
        wgt_cache_kb=(64,),
        out_cache_kb=(64,),
        dataflows=(Dataflow.WS, Dataflow.OS, Dataflow.RS),
        loop_orders=("BIOHW", "BOHWI"),
    )


@pytest.fixture
def synthetic_subnet_22():
    return make_synthetic_subnet_22()


@pytest.fixture
def small_subnet():
    return make_small_subnet()


@pytest.fixture
def reduced_space_24():
    return make_reduced_space_24()
