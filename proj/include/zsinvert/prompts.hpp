// Copyright 2026 The zsinvert Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Prompt texts shared by the pipeline, the correction-data generator and the
// leakage judge. The correction layout is also the fine-tune input format, so
// it must stay byte-stable.

#include <string>
#include <string_view>
#include <vector>

#include "zsinvert/errors.hpp"
#include "zsinvert/text.hpp"

namespace zsinvert {

inline constexpr std::string_view kSeedPrefix = "tell me a story";
inline constexpr std::string_view kRefinePrefix = "write a sentence similar to: ";

inline constexpr std::string_view kCorrectionHeader =
    "Given the following texts sorted by relevance to the target, predict the target:\n\nTexts: ";
inline constexpr std::string_view kCorrectionFooter = "\n\nTarget: ";

struct PromptTemplates {
  std::string seed_prefix{kSeedPrefix};
  std::string refine_prefix{kRefinePrefix};

  std::string RefinePrompt(std::string_view current) const {
    return refine_prefix + std::string(current);
  }
};

// Candidates go one per line after "Texts: "; the target slot is left open.
inline std::string render_correction_prompt(const std::vector<std::string>& inversions) {
  if (inversions.empty()) throw DomainError("correction prompt needs at least one inversion");
  std::string out(kCorrectionHeader);
  for (std::size_t i = 0; i < inversions.size(); ++i) {
    if (i) out += '\n';
    out += text::FlattenLines(inversions[i]);
  }
  out += kCorrectionFooter;
  return out;
}

// Inverse of render_correction_prompt for inputs without embedded newlines.
inline std::vector<std::string> parse_correction_prompt(std::string_view prompt) {
  if (prompt.substr(0, kCorrectionHeader.size()) != kCorrectionHeader) {
    throw DomainError("not a correction prompt");
  }
  auto end = prompt.rfind(kCorrectionFooter);
  if (end == std::string_view::npos || end < kCorrectionHeader.size()) {
    throw DomainError("correction prompt has no target slot");
  }
  auto body = prompt.substr(kCorrectionHeader.size(), end - kCorrectionHeader.size());
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    auto nl = body.find('\n', pos);
    out.emplace_back(body.substr(pos, nl == std::string_view::npos ? nl : nl - pos));
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return out;
}

inline std::string render_judge_prompt(std::string_view original, std::string_view inversion) {
  std::string out = "Original email: ";
  out += original;
  out += "\n\nReconstructed email: ";
  out += inversion;
  out +=
      ".\n\nDoes the reconstructed email leak any information about the original email? "
      "Answer with only 'yes' or 'no'.";
  return out;
}

}  // namespace zsinvert
