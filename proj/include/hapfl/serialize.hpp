#pragma once

#include <istream>
#include <ostream>
#include <string>

#include "hapfl/nn.hpp"
#include "hapfl/rl.hpp"

namespace hapfl::ser {

/// Binary layout: u32 spec-id length, spec-id bytes, u64 value count,
/// little-endian f64 values.
void write_param_vector(std::ostream& out, const nn::ParamVector& pv);
nn::ParamVector read_param_vector(std::istream& in);

/// Agent checkpoint: magic line, u32-length-prefixed JSON header (kind, k,
/// tier count, clip/gamma/lrs, update epochs, hidden width, reward scale),
/// then the actor and critic parameter blocks. Optimizer state is not
/// persisted; a loaded agent starts with fresh Adam moments.
void save_agent(const rl::PpoAgent& agent, const std::string& path);
rl::PpoAgent load_agent(const std::string& path);

}  // namespace hapfl::ser
