#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "hear/backend.hpp"
#include "hear/conv.hpp"
#include "hear/fastpath.hpp"

namespace hear {

// Closed-form counts of one convolution split into the merge pre-processing,
// the core convolution and the output folding. `add` is not modeled.
struct ConvCost {
    OpCounts pre, core, post;
    OpCounts total() const;
};

// n_p and the strategy are taken from the plan. `merged` layers pay the
// masking pre-step and the output folding, even at n_p = 1.
ConvCost predict_conv(const ConvPlan& plan, bool merged);

// Rotations of rotate_sum over n terms.
int rotate_sum_rotations(int n);

// Predicted counts per counter label of run_pipeline. Labels other than
// conv*/ are extensions beyond the convolution table.
std::map<std::string, OpCounts> predict(const PipelinePlan& plan);

bool is_extended_label(const std::string& label);

struct LayerCost {
    std::string label;
    bool extended = false;
    OpCounts predicted, measured;
};

struct CostReport {
    std::string network;
    Mode mode = Mode::Fast;
    Strategy strategy = Strategy::Giant;
    std::vector<LayerCost> layers;
    std::vector<ConvPlan> convs;

    OpCounts predicted_total() const;
    OpCounts measured_total() const;
    nlohmann::json to_json() const;
    std::string to_table() const;
};

CostReport make_report(const PipelinePlan& plan, const OpCounters& measured);

struct Verdict {
    bool pass = true;
    std::vector<std::string> mismatches;
    nlohmann::json breakdown;  // per conv layer: n_I, n_O, n_P and pre/core/post counts
};

// Passes iff every modeled field matches on every label.
Verdict compare(const CostReport& report);

}  // namespace hear
