#pragma once
/*
 * codec.hpp — command <-> payment-amount encoding.
 *
 * A command string becomes a sequence of satoshi amounts, one keysend payment
 * per amount.  Two schemes:
 *
 *   ascii    one payment per character, amount == the character's code point
 *            (printable range 32..126 only)
 *   huffman  each character maps to a short digit string from an n-ary
 *            (default quaternary) prefix-free codebook; every digit is sent
 *            as its own 1..arity satoshi payment
 *
 * Frames are delimited by sentinel amounts: 5 marks command start, 6 marks
 * command end.  Huffman digits stay in 1..4 so payload amounts can never be
 * mistaken for sentinels.
 */

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lnsim/types.hpp"

namespace lnsim {

constexpr Sat kFrameStart = 5;   // start-of-command sentinel amount
constexpr Sat kFrameEnd = 6;     // end-of-command sentinel amount
constexpr Sat kAsciiMin = 32;    // lowest encodable character (space)
constexpr Sat kAsciiMax = 126;   // highest encodable character ('~')

// ==================== Codebook ====================

// Prefix-free n-ary code over digits '1'..('0'+arity), one code per
// character.  Deterministic: entries are kept in character order, and
// construction breaks weight ties by character code.
class Codebook {
public:
    Codebook() = default;

    // Build an optimal length codebook from symbol weights (n-ary Huffman).
    // The symbol count is padded with zero-weight dummies so the code tree is
    // full; weight ties are broken by character code so rebuilds are stable.
    static Codebook build(const std::map<char, std::uint64_t>& weights, int arity = 4);

    // The quaternary codebook used by the stock scenarios (22 symbols
    // covering the demo command alphabet).
    static const Codebook& default_quaternary();

    // File format: one "<codepoint> <digit-string>" pair per line,
    // '#' comments allowed.  Loading validates digits and prefix-freeness.
    static Codebook load(std::istream& in, int arity = 4);
    static Codebook load_file(const std::string& path, int arity = 4);
    void save(std::ostream& out) const;

    static Codebook from_entries(const std::map<char, std::string>& entries, int arity);

    const std::string* code_for(char c) const;
    const std::map<char, std::string>& entries() const { return codes_; }
    int arity() const { return arity_; }
    std::size_t size() const { return codes_.size(); }

    // Sum of weight[c] * len(code[c]) — digits emitted for a weighted corpus.
    std::uint64_t weighted_length(const std::map<char, std::uint64_t>& weights) const;

private:
    std::map<char, std::string> codes_;
    int arity_ = 4;
};

// True when no code is a prefix of another (and the table is non-empty).
bool verify_prefix_free(const Codebook& book);

// ==================== Encoding schemes ====================

struct EncodingScheme {
    enum class Kind { ascii, huffman };

    Kind kind = Kind::ascii;
    Codebook codebook;   // huffman only

    static EncodingScheme ascii() { return {}; }
    static EncodingScheme huffman(Codebook book);  // rejects arity > 4 (sentinel overlap)

    const char* name() const { return kind == Kind::ascii ? "ascii" : "huffman"; }
};

enum class DecodeErrorKind {
    invalid_symbol,    // amount outside the scheme's alphabet
    incomplete_code,   // stream ended in the middle of a code word
    invalid_code,      // digit sequence matches no code word
};

const char* to_string(DecodeErrorKind kind);

struct DecodeResult {
    bool ok = false;
    std::string text;                                  // valid when ok
    DecodeErrorKind error = DecodeErrorKind::invalid_symbol;  // valid when !ok

    static DecodeResult success(std::string t);
    static DecodeResult failure(DecodeErrorKind kind);
};

// Payload amounts for a command (no sentinels).  Throws SimError on
// unencodable characters.
std::vector<Sat> encode(const std::string& command, const EncodingScheme& scheme);

// Inverse of encode() over a sentinel-free payload.
DecodeResult decode(const std::vector<Sat>& amounts, const EncodingScheme& scheme);

// Wrap / unwrap a payload in the 5 ... 6 sentinel frame.  deframe throws
// SimError when the sentinels are missing, misplaced or repeated.
std::vector<Sat> frame(std::vector<Sat> payload);
std::vector<Sat> deframe(const std::vector<Sat>& framed);

// Total satoshi across a sequence of payment amounts.
Sat sequence_cost(const std::vector<Sat>& amounts);

// Per-character frequencies of a string (helper for codebook construction).
std::map<char, std::uint64_t> char_frequencies(const std::string& text);

// Frequency table file: "<codepoint> <weight>" per line, '#' comments.
std::map<char, std::uint64_t> load_frequencies(std::istream& in);

}  // namespace lnsim
