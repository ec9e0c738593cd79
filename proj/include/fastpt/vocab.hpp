#pragma once

// Reserved token ids shared by the model, the task generators and the
// dataset files. Content tokens start at kFirstContent.

namespace fastpt::vocab {

inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kMask = 3;         // sentinel replacing a hidden span
inline constexpr int kMarkRestore = 4;  // pretraining objective markers
inline constexpr int kMarkReverse = 5;
inline constexpr int kMarkSpan = 6;
inline constexpr int kMarkContinue = 7;
inline constexpr int kFirstContent = 8;

}  // namespace fastpt::vocab
