#pragma once

namespace valta {

inline constexpr const char* kVersion = "0.1.0";

// Corpus directory and checkpoint formats carry this; loaders reject others.
inline constexpr int kCorpusFormatVersion = 1;
inline constexpr int kCheckpointFormatVersion = 1;

}  // namespace valta
