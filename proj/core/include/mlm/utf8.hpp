// Copyright 2026 The mlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mlm::utf8 {

// Splits a UTF-8 string into one std::string per code point. Invalid bytes
// are passed through as single-byte units so no input is ever dropped.
std::vector<std::string> split_chars(std::string_view text);

// Decodes the code point starting at text[pos] and advances pos.
char32_t next_codepoint(std::string_view text, size_t& pos);

std::string encode(char32_t cp);

bool is_space(char32_t cp);

// Uppercase test over Latin (incl. Turkish), Greek and Cyrillic letters.
// Table-driven so the result does not depend on the process locale.
bool is_upper(char32_t cp);

bool is_digit(char32_t cp);

std::string_view trim(std::string_view s);

}  // namespace mlm::utf8
