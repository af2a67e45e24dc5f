#include <string.h>

/*@ requires \true;
  @ ensures \result <= x && \result <= y && \result <= z;
  @ assigns \nothing;
*/
int min(int x, int y, int z) {
    if (x < y) return (x < z) ? x : z;
    else return (y < z) ? y : z;
}
/*@ requires \valid(s1) && \valid(s2);
  @ ensures \result >= 0;
  @ assigns \nothing;
*/
int levenshtein(char *s1, char *s2) {
    int len1 = strlen(s1), len2 = strlen(s2);
    int matrix[len1 + 1][len2 + 1];

    /*@ loop invariant 0 <= x <= len1;
      @ loop assigns matrix[0][0 .. len1];
    */
    for (int x = 0; x <= len1; x++) matrix[0][x] = x;

    /*@ loop invariant 0 <= y <= len2;
      @ loop assigns matrix[0 .. len2][0];
    */
    for (int y = 0; y <= len2; y++) matrix[y][0] = y;
    /*@ loop invariant 1 <= x <= len1;
      @ loop assigns matrix[1 .. len1][1 .. len2];
    */
    for (int x = 1; x <= len1; x++) {
        /*@ loop invariant 1 <= y <= len2;
          @ loop assigns matrix[x][1 .. len2];
        */
        for (int y = 1; y <= len2; y++) {
            int cost = (s1[x - 1] == s2[y - 1]) ? 0 : 1;
            matrix[x][y] = min(matrix[x - 1][y] + 1, matrix[x][y - 1] + 1, matrix[x - 1][y - 1] + cost);
        }
    }
    return matrix[len1][len2];
}
