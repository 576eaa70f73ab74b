#ifndef SHAPG_COALITION_HPP
#define SHAPG_COALITION_HPP

#include <bit>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "shapg/common.hpp"

namespace shapg {

/// Subset of players represented as a bitmask. One 64-bit word covers the
/// common case; larger player counts spill into additional words.
class Coalition {
public:
    Coalition() = default;

    explicit Coalition(std::size_t player_count)
        : players_(player_count), words_((player_count + 63) / 64, 0) {}

    static Coalition from_indices(std::size_t player_count, std::span<const int> indices) {
        Coalition c(player_count);
        for (int i : indices) c.set(i);
        return c;
    }

    static Coalition from_indices(std::size_t player_count, std::initializer_list<int> indices) {
        return from_indices(player_count, std::span<const int>(indices.begin(), indices.size()));
    }

    std::size_t player_count() const { return players_; }

    void set(std::size_t i) {
        check_index(i);
        words_[i / 64] |= std::uint64_t{1} << (i % 64);
    }

    void reset(std::size_t i) {
        check_index(i);
        words_[i / 64] &= ~(std::uint64_t{1} << (i % 64));
    }

    bool test(std::size_t i) const {
        check_index(i);
        return (words_[i / 64] >> (i % 64)) & 1;
    }

    /// Number of members.
    std::size_t size() const {
        std::size_t n = 0;
        for (auto w : words_) n += std::popcount(w);
        return n;
    }

    bool empty() const {
        for (auto w : words_) {
            if (w != 0) return false;
        }
        return true;
    }

    Coalition with(std::size_t i) const {
        Coalition c = *this;
        c.set(i);
        return c;
    }

    /// Member indices in ascending order.
    std::vector<int> indices() const {
        std::vector<int> out;
        out.reserve(size());
        for (std::size_t w = 0; w < words_.size(); ++w) {
            std::uint64_t bits = words_[w];
            while (bits) {
                int b = std::countr_zero(bits);
                out.push_back(static_cast<int>(w * 64 + b));
                bits &= bits - 1;
            }
        }
        return out;
    }

    bool operator==(const Coalition& o) const {
        return players_ == o.players_ && words_ == o.words_;
    }

    /// Bitmask rendered as an unsigned decimal number, little bit first in
    /// value terms (bit i has weight 2^i). Used as the cache key format.
    std::string to_decimal() const {
        std::vector<std::uint64_t> v = words_;
        std::string digits;
        bool nonzero = true;
        while (nonzero) {
            nonzero = false;
            std::uint64_t rem = 0;
            for (std::size_t w = v.size(); w-- > 0;) {
                // 128-bit divmod of (rem:word) by 10
                unsigned __int128 cur = (static_cast<unsigned __int128>(rem) << 64) | v[w];
                v[w] = static_cast<std::uint64_t>(cur / 10);
                rem = static_cast<std::uint64_t>(cur % 10);
                if (v[w] != 0) nonzero = true;
            }
            digits.push_back(static_cast<char>('0' + rem));
        }
        return std::string(digits.rbegin(), digits.rend());
    }

    static Coalition from_decimal(std::size_t player_count, const std::string& text) {
        if (text.empty()) throw InvalidArgument("coalition key is empty");
        Coalition c(player_count);
        for (char ch : text) {
            if (ch < '0' || ch > '9')
                throw InvalidArgument("coalition key is not a decimal number: " + text);
            std::uint64_t carry = static_cast<std::uint64_t>(ch - '0');
            for (auto& w : c.words_) {
                unsigned __int128 cur = static_cast<unsigned __int128>(w) * 10 + carry;
                w = static_cast<std::uint64_t>(cur);
                carry = static_cast<std::uint64_t>(cur >> 64);
            }
            if (carry != 0)
                throw InvalidArgument("coalition key exceeds player range: " + text);
        }
        // Reject bits at or above player_count.
        for (std::size_t i = player_count; i < c.words_.size() * 64; ++i) {
            if ((c.words_[i / 64] >> (i % 64)) & 1)
                throw InvalidArgument("coalition key has bits outside player range: " + text);
        }
        return c;
    }

    struct Hash {
        std::size_t operator()(const Coalition& c) const {
            std::size_t h = std::hash<std::size_t>{}(c.players_);
            for (auto w : c.words_) h = h * 1099511628211ULL ^ std::hash<std::uint64_t>{}(w);
            return h;
        }
    };

private:
    void check_index(std::size_t i) const {
        if (i >= players_) throw InvalidArgument("player index out of range");
    }

    std::size_t players_ = 0;
    std::vector<std::uint64_t> words_;
};

}  // namespace shapg

#endif
