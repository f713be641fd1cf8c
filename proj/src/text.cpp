#include "hypermem/text.hpp"

#include "hypermem/error.hpp"

#include <openssl/evp.h>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <array>
#include <cctype>
#include <memory>

namespace hypermem {

namespace {

bool is_word_byte(unsigned char c) {
    return std::isalnum(c) != 0 || c == '_' || c >= 0x80;
}

bool is_separator_byte(unsigned char c) {
    return std::isspace(c) != 0 || std::iscntrl(c) != 0;
}

}  // namespace

void require_supported(const TokenizerSpec& spec) {
    if (spec.name != TokenizerSpec{}.name) {
        throw ConfigError("unsupported tokenizer '" + spec.name + "'");
    }
}

std::vector<TokenSpan> tokenize_spans(std::string_view text, const TokenizerSpec& spec) {
    require_supported(spec);
    std::vector<TokenSpan> spans;
    std::size_t i = 0;
    while (i < text.size()) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (is_separator_byte(c)) {
            ++i;
        } else if (is_word_byte(c)) {
            std::size_t j = i;
            while (j < text.size() && is_word_byte(static_cast<unsigned char>(text[j]))) {
                ++j;
            }
            spans.push_back({i, j});
            i = j;
        } else {
            spans.push_back({i, i + 1});
            ++i;
        }
    }
    return spans;
}

std::vector<std::string> tokenize(std::string_view text, const TokenizerSpec& spec) {
    std::vector<std::string> tokens;
    for (const auto& span : tokenize_spans(text, spec)) {
        tokens.emplace_back(text.substr(span.begin, span.end - span.begin));
    }
    return tokens;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) {
            out += ' ';
        }
        out += tokens[i];
    }
    return out;
}

std::size_t count_tokens(std::string_view text, const TokenizerSpec& spec) {
    return tokenize_spans(text, spec).size();
}

std::string nfc_normalize(std::string_view text) {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status)) {
        throw Error(std::string("ICU NFC normalizer unavailable: ") + u_errorName(status));
    }
    // Reject malformed UTF-8 rather than silently substituting U+FFFD.
    int32_t offset = 0;
    const auto* bytes = reinterpret_cast<const uint8_t*>(text.data());
    const auto length = static_cast<int32_t>(text.size());
    while (offset < length) {
        UChar32 cp = 0;
        U8_NEXT(bytes, offset, length, cp);
        if (cp < 0) {
            throw InvalidArgument("text is not valid UTF-8 (byte offset " + std::to_string(offset) + ")");
        }
    }
    const icu::UnicodeString source = icu::UnicodeString::fromUTF8(
        icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
    if (nfc->isNormalized(source, status) && U_SUCCESS(status)) {
        return std::string(text);
    }
    status = U_ZERO_ERROR;
    const icu::UnicodeString normalized = nfc->normalize(source, status);
    if (U_FAILURE(status)) {
        throw Error(std::string("NFC normalization failed: ") + u_errorName(status));
    }
    std::string out;
    normalized.toUTF8String(out);
    return out;
}

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int length = 0;
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest.data(), &length) != 1) {
        throw Error("sha256 digest failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(length * 2);
    for (unsigned int i = 0; i < length; ++i) {
        out += kHex[digest[i] >> 4];
        out += kHex[digest[i] & 0xF];
    }
    return out;
}

std::string stable_id(std::string_view prefix, std::string_view key) {
    return std::string(prefix) + sha256_hex(key).substr(0, 16);
}

std::string case_fold(std::string_view text) {
    icu::UnicodeString u = icu::UnicodeString::fromUTF8(
        icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
    u.foldCase();
    std::string out;
    u.toUTF8String(out);
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b])) != 0) {
        ++b;
    }
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1])) != 0) {
        --e;
    }
    return std::string(s.substr(b, e - b));
}

std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

}  // namespace hypermem
