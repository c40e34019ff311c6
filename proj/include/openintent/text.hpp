#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace openintent {

/// Lowercases ASCII letters, splits on ASCII and Unicode whitespace, and strips
/// leading/trailing ASCII punctuation from each token. Empty tokens are dropped.
/// Multibyte UTF-8 sequences pass through untouched.
std::vector<std::string> tokenize(std::string_view text);

/// Trim ASCII whitespace from both ends.
std::string_view trim(std::string_view s);

}  // namespace openintent
