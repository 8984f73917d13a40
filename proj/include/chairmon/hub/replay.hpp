#pragma once

#include <vector>

#include "chairmon/hub/hub.hpp"

namespace chairmon::hub {

/// Re-drive stored frames through a fresh hub on a virtual clock. Frames that
/// carried a session are replayed inside a session opened at the same start
/// time; the rest are skipped. Writes nothing. Returns the appData stream.
std::vector<AppDataMsg> replay_samples(const std::vector<store::SampleRecord>& samples, const HubConfig& cfg);

/// The payload a chair would have sent for `rec`, readings at full precision.
std::string replay_payload(const store::SampleRecord& rec);

}  // namespace chairmon::hub
