#pragma once

#include <string>
#include <vector>

#include "hear/model.hpp"

namespace hear {

struct Joint {
    double x = 0.0;
    double y = 0.0;
};

using Frame = std::vector<Joint>;

struct JointSequence {
    std::vector<Frame> frames;

    int joints() const { return frames.empty() ? 0 : static_cast<int>(frames.front().size()); }
    void validate() const;
};

// Mean Euclidean joint distance of each frame to its predecessor; frame 0 scores +inf.
std::vector<double> frame_scores(const JointSequence& seq);

JointSequence select_frames(const JointSequence& seq, int target, double threshold = 5.0);
JointSequence normalize(const JointSequence& seq);
InputTensor assemble(const JointSequence& seq);

JointSequence read_frames_json(const std::string& path);
JointSequence frames_from_json_text(const std::string& text);
void write_tensor_json(const std::string& path, const InputTensor& x);
InputTensor read_tensor_json(const std::string& path);

}  // namespace hear
