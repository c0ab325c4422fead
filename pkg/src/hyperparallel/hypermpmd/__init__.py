"""MPMD process groups, workload graphs and the SPMD/MPMD schedule simulator."""

from .groups import (ProcessGroupSpec, check_process_groups, load_process_groups, parse_process_groups,
                     validate_against_topology)
from .scheduler import ComparisonReport, compare_schedules, schedule_mpmd, schedule_spmd
from .timeline import (Interval, ScheduleReport, Timeline, bubble_fraction, communication_share,
                       masking_ratio, report, straggler_gap, utilization)
from .workload import CollectiveSpec, Task, WorkloadGraph, load_workload, parse_workload

__all__ = [
    "CollectiveSpec", "ComparisonReport", "Interval", "ProcessGroupSpec", "ScheduleReport", "Task",
    "Timeline", "WorkloadGraph", "bubble_fraction", "check_process_groups", "communication_share",
    "compare_schedules", "load_process_groups", "load_workload", "masking_ratio", "parse_process_groups",
    "parse_workload", "report", "schedule_mpmd", "schedule_spmd", "straggler_gap", "utilization",
    "validate_against_topology",
]
