#include "trajcap/vocab.hpp"

#include <stdexcept>

namespace trajcap {

namespace {
const char* const kReserved[kNumReservedTokens] = {"<PAD>", "<BOS>", "<EOS>", "<UNK>"};
}

Vocabulary::Vocabulary() {
    for (const char* t : kReserved) add(t);
}

int Vocabulary::add(const std::string& token) {
    auto it = index_.find(token);
    if (it != index_.end()) return it->second;
    int idx = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
    index_.emplace(token, idx);
    return idx;
}

int Vocabulary::encode(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnkToken : it->second;
}

const std::string& Vocabulary::decode(int index) const {
    if (index < 0 || index >= size()) {
        throw std::invalid_argument("token index out of range");
    }
    return tokens_[static_cast<std::size_t>(index)];
}

bool Vocabulary::contains(const std::string& token) const {
    return index_.count(token) != 0;
}

Vocabulary Vocabulary::from_token_list(const std::vector<std::string>& all_tokens) {
    if (all_tokens.size() < kNumReservedTokens) {
        throw std::invalid_argument("token list misses reserved entries");
    }
    for (int i = 0; i < kNumReservedTokens; ++i) {
        if (all_tokens[static_cast<std::size_t>(i)] != kReserved[i]) {
            throw std::invalid_argument("reserved tokens must occupy indices 0..3");
        }
    }
    Vocabulary v;
    for (std::size_t i = kNumReservedTokens; i < all_tokens.size(); ++i) {
        if (v.contains(all_tokens[i])) {
            throw std::invalid_argument("duplicate token in vocabulary list");
        }
        v.add(all_tokens[i]);
    }
    return v;
}

}  // namespace trajcap
