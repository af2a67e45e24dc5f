/*@
  requires \exists integer i; i >= 0 && str[i] == '\0' && (\forall integer j; 0 <= j <= i ==> \valid_read(str + j));
  ensures \result == (\strlen(str) == 0);
  assigns \nothing;
*/
int isPalindrome(const char* str) {
    int left = 0, right = strlen(str); 
    while (left < right) {
        if (str[left] != str[right]) {
            return 0; // Not a palindrome
        }
        left++;
        right--;
    }
    return 1; // Palindrome
}
