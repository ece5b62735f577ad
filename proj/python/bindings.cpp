#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fmtree/bench.hpp"
#include "fmtree/btree_baseline.hpp"
#include "fmtree/errors.hpp"
#include "fmtree/flash_device.hpp"
#include "fmtree/fm_tree.hpp"
#include "fmtree/model_oracle.hpp"
#include "fmtree/slot_codec.hpp"
#include "fmtree/tree_config.hpp"

namespace py = pybind11;
using namespace fmtree;

namespace {

std::string entry_repr(const Entry& e) {
    return "Entry(key=" + std::to_string(e.key) + ", payload=" + std::to_string(e.payload) + ")";
}

}  // namespace

PYBIND11_MODULE(_fmtree, m) {
    m.doc() = "Erase-avoiding search tree on emulated multi-level flash";

    auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<InvalidGeometry>(m, "InvalidGeometry", error);
    py::register_exception<OutOfRange>(m, "OutOfRange", error);
    py::register_exception<MonotonicityViolation>(m, "MonotonicityViolation", error);
    py::register_exception<Overflow>(m, "Overflow", error);
    py::register_exception<InvalidDigit>(m, "InvalidDigit", error);
    py::register_exception<WidthMismatch>(m, "WidthMismatch", error);
    py::register_exception<IllegalTransition>(m, "IllegalTransition", error);
    py::register_exception<InvalidConfig>(m, "InvalidConfig", error);
    py::register_exception<ConfigTooLarge>(m, "ConfigTooLarge", error);
    py::register_exception<KeyOverflow>(m, "KeyOverflow", error);
    py::register_exception<DeviceFull>(m, "DeviceFull", error);
    py::register_exception<AlreadyBarren>(m, "AlreadyBarren", error);
    py::register_exception<TrialFailure>(m, "TrialFailure", error);
    py::register_exception<IoFailure>(m, "IoFailure", error);

    py::class_<FlashGeometry>(m, "FlashGeometry")
        .def(py::init([](std::uint32_t q, std::uint32_t cells_per_block, std::uint32_t block_count) {
                 return FlashGeometry{q, cells_per_block, block_count};
             }),
             py::arg("q") = 8, py::arg("cells_per_block") = 1, py::arg("block_count") = 1)
        .def_readwrite("q", &FlashGeometry::q)
        .def_readwrite("cells_per_block", &FlashGeometry::cells_per_block)
        .def_readwrite("block_count", &FlashGeometry::block_count)
        .def(py::self == py::self);

    py::class_<OpCounters>(m, "OpCounters")
        .def(py::init<>())
        .def_readonly("cell_reads", &OpCounters::cell_reads)
        .def_readonly("cell_programs", &OpCounters::cell_programs)
        .def_readonly("block_erases", &OpCounters::block_erases)
        .def(py::self == py::self)
        .def("__repr__", [](const OpCounters& c) {
            return "OpCounters(cell_reads=" + std::to_string(c.cell_reads) +
                   ", cell_programs=" + std::to_string(c.cell_programs) +
                   ", block_erases=" + std::to_string(c.block_erases) + ")";
        });

    py::class_<WearStats>(m, "WearStats")
        .def_readonly("max_erases", &WearStats::max_erases)
        .def_readonly("mean_erases", &WearStats::mean_erases)
        .def_readonly("per_block", &WearStats::per_block);

    py::class_<FlashDevice>(m, "FlashDevice")
        .def(py::init<FlashGeometry>(), py::arg("geometry"))
        .def_property_readonly("geometry", &FlashDevice::geometry)
        .def("read_cell", &FlashDevice::read_cell, py::arg("block"), py::arg("cell"))
        .def("program_cell", &FlashDevice::program_cell, py::arg("block"), py::arg("cell"),
             py::arg("target"))
        .def("erase_block", &FlashDevice::erase_block, py::arg("block"))
        .def("counters", &FlashDevice::counters)
        .def("reset_counters", &FlashDevice::reset_counters)
        .def("wear_stats", &FlashDevice::wear_stats)
        .def("erase_count", &FlashDevice::erase_count, py::arg("block"))
        .def("dump", &FlashDevice::dump);

    py::class_<DigitWord>(m, "DigitWord")
        .def(py::init([](std::vector<CellLevel> digits) { return DigitWord{std::move(digits)}; }),
             py::arg("digits"))
        .def_readwrite("digits", &DigitWord::digits)
        .def("width", &DigitWord::width);
    m.def("encode_word", &encode_word, py::arg("value"), py::arg("width"), py::arg("q"));
    m.def("decode_word", &decode_word, py::arg("word"), py::arg("q"));
    m.def("can_overwrite", &can_overwrite, py::arg("current"), py::arg("next"));

    py::class_<TreeConfig>(m, "TreeConfig")
        .def(py::init<>())
        .def_readwrite("slots_per_node", &TreeConfig::slots_per_node)
        .def_readwrite("key_width", &TreeConfig::key_width)
        .def_readwrite("payload_width", &TreeConfig::payload_width)
        .def_readwrite("gc_barren_fraction", &TreeConfig::gc_barren_fraction)
        .def_readwrite("recycle_tombstones", &TreeConfig::recycle_tombstones)
        .def_readwrite("always_erase_on_rewrite", &TreeConfig::always_erase_on_rewrite);
    m.def("node_cells", &node_cells, py::arg("config"));

    py::class_<Entry>(m, "Entry")
        .def(py::init([](std::uint64_t key, std::uint64_t payload) { return Entry{key, payload}; }),
             py::arg("key"), py::arg("payload"))
        .def_readonly("key", &Entry::key)
        .def_readonly("payload", &Entry::payload)
        .def(py::self == py::self)
        .def("__repr__", &entry_repr);

    py::class_<TreeStats>(m, "TreeStats")
        .def_readonly("height", &TreeStats::height)
        .def_readonly("live_count", &TreeStats::live_count)
        .def_readonly("barren_blocks", &TreeStats::barren_blocks)
        .def_readonly("dead_slots", &TreeStats::dead_slots)
        .def_readonly("inserted_total", &TreeStats::inserted_total);

    py::class_<FmTree>(m, "FmTree")
        .def(py::init<FlashDevice&, TreeConfig>(), py::arg("device"), py::arg("config"),
             py::keep_alive<1, 2>())
        .def("search", &FmTree::search, py::arg("key"))
        .def("insert", &FmTree::insert, py::arg("key"), py::arg("payload"))
        .def("remove", &FmTree::remove, py::arg("key"))
        .def("gc_rebuild", &FmTree::gc_rebuild)
        .def("live_entries", &FmTree::live_entries)
        .def("stats", &FmTree::stats)
        .def("validate", &FmTree::validate)
        .def_property_readonly("root", &FmTree::root)
        .def_property_readonly("height", &FmTree::height);

    py::class_<BaselineTree>(m, "BaselineTree")
        .def(py::init<FlashDevice&, TreeConfig>(), py::arg("device"), py::arg("config"),
             py::keep_alive<1, 2>())
        .def("search", &BaselineTree::search, py::arg("key"))
        .def("insert", &BaselineTree::insert, py::arg("key"), py::arg("payload"))
        .def("remove", &BaselineTree::remove, py::arg("key"))
        .def("live_entries", &BaselineTree::live_entries)
        .def("stats", &BaselineTree::stats)
        .def("validate", &BaselineTree::validate)
        .def_property_readonly("root", &BaselineTree::root)
        .def_property_readonly("height", &BaselineTree::height);

    py::enum_<WorkloadOp::Kind>(m, "OpKind")
        .value("Insert", WorkloadOp::Kind::Insert)
        .value("Delete", WorkloadOp::Kind::Delete)
        .value("Search", WorkloadOp::Kind::Search);
    py::class_<WorkloadOp>(m, "WorkloadOp")
        .def_static("insert", &WorkloadOp::insert, py::arg("key"), py::arg("payload"))
        .def_static("erase", &WorkloadOp::erase, py::arg("key"))
        .def_static("search", &WorkloadOp::search, py::arg("key"))
        .def_readonly("kind", &WorkloadOp::kind)
        .def_readonly("key", &WorkloadOp::key)
        .def_readonly("payload", &WorkloadOp::payload)
        .def(py::self == py::self)
        .def("__repr__", [](const WorkloadOp& op) { return to_string(op); });

    py::enum_<TreeKind>(m, "TreeKind").value("Fm", TreeKind::Fm).value("Baseline", TreeKind::Baseline);
    py::class_<Divergence>(m, "Divergence")
        .def_readonly("op_index", &Divergence::op_index)
        .def_readonly("expected", &Divergence::expected)
        .def_readonly("actual", &Divergence::actual);
    py::class_<Verdict>(m, "Verdict")
        .def_readonly("passed", &Verdict::pass)
        .def_readonly("first_divergence", &Verdict::first_divergence);
    py::class_<CheckSetup>(m, "CheckSetup")
        .def(py::init<>())
        .def_readwrite("geometry", &CheckSetup::geometry)
        .def_readwrite("config", &CheckSetup::config)
        .def_readwrite("skip_tombstone_fault", &CheckSetup::skip_tombstone_fault)
        .def_readwrite("rebuild_after", &CheckSetup::rebuild_after);
    m.def("default_check_setup", &default_check_setup, py::arg("blocks") = 1024);
    m.def("differential_check", &differential_check, py::arg("ops"), py::arg("kind"),
          py::arg("setup") = default_check_setup(), py::call_guard<py::gil_scoped_release>());
    m.def("differential_workload", &differential_workload, py::arg("seed"), py::arg("ops"),
          py::arg("key_bits") = 32, py::arg("payload_bits") = 32);

    py::class_<TimingWeights>(m, "TimingWeights")
        .def(py::init<>())
        .def_readwrite("read_us", &TimingWeights::read_us)
        .def_readwrite("write_us", &TimingWeights::write_us)
        .def_readwrite("erase_us", &TimingWeights::erase_us);

    py::class_<BenchConfig>(m, "BenchConfig")
        .def(py::init<>())
        .def_readwrite("seed", &BenchConfig::seed)
        .def_readwrite("baseline_inserts", &BenchConfig::baseline_inserts)
        .def_readwrite("mixed_ops", &BenchConfig::mixed_ops)
        .def_readwrite("trials", &BenchConfig::trials)
        .def_readwrite("insert_fraction", &BenchConfig::insert_fraction)
        .def_readwrite("q", &BenchConfig::q)
        .def_readwrite("blocks", &BenchConfig::blocks)
        .def_readwrite("slots_per_node", &BenchConfig::slots_per_node)
        .def_readwrite("key_bits", &BenchConfig::key_bits)
        .def_readwrite("payload_bits", &BenchConfig::payload_bits)
        .def_readwrite("gc_barren_fraction", &BenchConfig::gc_barren_fraction)
        .def_readwrite("always_erase_on_rewrite", &BenchConfig::always_erase_on_rewrite)
        .def_readwrite("weights", &BenchConfig::weights);
    m.def("validate_bench_config", py::overload_cast<const BenchConfig&>(&validate), py::arg("config"));
    m.def("generate_workload", &generate_workload, py::arg("config"), py::arg("trial"));

    py::class_<WearSummary>(m, "WearSummary")
        .def_readonly("max_erases", &WearSummary::max_erases)
        .def_readonly("mean_erases", &WearSummary::mean_erases);
    py::class_<TreeReport>(m, "TreeReport")
        .def_readonly("counters", &TreeReport::counters)
        .def_readonly("wear", &TreeReport::wear)
        .def_readonly("stats", &TreeReport::stats)
        .def_readonly("synthetic_cost_us", &TreeReport::synthetic_cost_us);
    py::class_<TrialReport>(m, "TrialReport")
        .def_readonly("trial", &TrialReport::trial)
        .def_readonly("fm", &TrialReport::fm)
        .def_readonly("baseline", &TrialReport::baseline)
        .def_readonly("erase_ratio", &TrialReport::erase_ratio)
        .def_readonly("read_ratio", &TrialReport::read_ratio)
        .def_readonly("program_ratio", &TrialReport::program_ratio);
    py::class_<TreeMeans>(m, "TreeMeans")
        .def_readonly("cell_reads", &TreeMeans::cell_reads)
        .def_readonly("cell_programs", &TreeMeans::cell_programs)
        .def_readonly("block_erases", &TreeMeans::block_erases)
        .def_readonly("max_block_erases", &TreeMeans::max_block_erases)
        .def_readonly("synthetic_cost_us", &TreeMeans::synthetic_cost_us);
    py::class_<ExperimentMeans>(m, "ExperimentMeans")
        .def_readonly("fm", &ExperimentMeans::fm)
        .def_readonly("baseline", &ExperimentMeans::baseline)
        .def_readonly("erase_ratio", &ExperimentMeans::erase_ratio)
        .def_readonly("read_ratio", &ExperimentMeans::read_ratio)
        .def_readonly("program_ratio", &ExperimentMeans::program_ratio);
    py::class_<ExperimentReport>(m, "ExperimentReport")
        .def_readonly("config", &ExperimentReport::config)
        .def_readonly("trials", &ExperimentReport::trials)
        .def_readonly("means", &ExperimentReport::means)
        .def(py::self == py::self);

    py::enum_<ReportFormat>(m, "ReportFormat")
        .value("Json", ReportFormat::Json)
        .value("Csv", ReportFormat::Csv);
    m.def("run_trial", &run_trial, py::arg("config"), py::arg("trial"),
          py::call_guard<py::gil_scoped_release>());
    m.def("run_experiment", &run_experiment, py::arg("config"), py::arg("jobs") = 1,
          py::call_guard<py::gil_scoped_release>());
    m.def("render_report", &render_report, py::arg("report"), py::arg("format"));
    m.def("parse_json_report", &parse_json_report, py::arg("text"));
    m.def("emit_report", &emit_report, py::arg("report"), py::arg("format"), py::arg("destination"));
}
