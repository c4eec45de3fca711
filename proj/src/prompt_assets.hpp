#pragma once

namespace fashionrec::detail {

extern const char* const kBasicPrompt;
extern const char* const kPersonalizedPrompt;
extern const char* const kAlternativePrompt;

}  // namespace fashionrec::detail
