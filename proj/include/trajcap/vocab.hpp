#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace trajcap {

inline constexpr int kPadToken = 0;
inline constexpr int kBosToken = 1;
inline constexpr int kEosToken = 2;
inline constexpr int kUnkToken = 3;
inline constexpr int kNumReservedTokens = 4;

/// Dense token<->index bijection with the four reserved tokens pinned to
/// indices 0..3. Unknown tokens encode to <UNK>.
class Vocabulary {
public:
    Vocabulary();

    /// Appends a token if absent; returns its index either way.
    int add(const std::string& token);

    int encode(const std::string& token) const;
    const std::string& decode(int index) const;

    bool contains(const std::string& token) const;
    int size() const { return static_cast<int>(tokens_.size()); }

    /// All tokens in index order, reserved ones first.
    const std::vector<std::string>& tokens() const { return tokens_; }

    /// Rebuilds from a full token list (e.g. a checkpoint header). Validates
    /// the reserved prefix and uniqueness.
    static Vocabulary from_token_list(const std::vector<std::string>& all_tokens);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

}  // namespace trajcap
